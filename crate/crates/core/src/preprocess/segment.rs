//! Cutting recordings into labelled gesture repetitions.

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::bvh::MotionClip;
use crate::scalar::Scalar;

/// One annotated gesture span `[start_frame, end_frame)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentAnnotation {
    pub label: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Reads the `label,start_frame,end_frame` annotation CSV.
pub fn read_annotations(text: &str) -> Result<Vec<SegmentAnnotation>, PreprocessError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| PreprocessError::Annotation(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["label", "start_frame", "end_frame"] {
        return Err(PreprocessError::Annotation(format!(
            "expected header label,start_frame,end_frame, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e: csv::Error| PreprocessError::Annotation(e.to_string())))
        .collect()
}

pub fn write_annotations(annotations: &[SegmentAnnotation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for a in annotations {
        w.serialize(a).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

/// Checks bounds and pairwise overlap of annotations against a clip length.
pub fn validate_annotations(annotations: &[SegmentAnnotation], frames: usize) -> Result<(), PreprocessError> {
    for a in annotations {
        if a.start_frame >= a.end_frame || a.end_frame > frames {
            return Err(PreprocessError::Bounds(format!(
                "{} [{}, {}) does not fit a {frames}-frame clip",
                a.label, a.start_frame, a.end_frame
            )));
        }
    }
    let mut order: Vec<&SegmentAnnotation> = annotations.iter().collect();
    order.sort_by_key(|a| (a.start_frame, a.end_frame));
    for pair in order.windows(2) {
        if pair[1].start_frame < pair[0].end_frame {
            return Err(PreprocessError::Overlap(format!(
                "{} [{}, {}) overlaps {} [{}, {})",
                pair[0].label, pair[0].start_frame, pair[0].end_frame, pair[1].label, pair[1].start_frame, pair[1].end_frame
            )));
        }
    }
    Ok(())
}

/// Splits a clip into labelled clips, in annotation order.
pub fn segment<T: Scalar>(
    clip: &MotionClip<T>,
    annotations: &[SegmentAnnotation],
) -> Result<Vec<(String, MotionClip<T>)>, PreprocessError> {
    validate_annotations(annotations, clip.frame_count())?;
    Ok(annotations
        .iter()
        .map(|a| (a.label.clone(), clip.slice(a.start_frame, a.end_frame)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(frames: usize) -> MotionClip<f64> {
        let data = (0..frames * 2).map(|v| v as f64).collect();
        MotionClip::new("s".into(), 1.0 / 90.0, 2, data).unwrap()
    }

    fn ann(label: &str, s: usize, e: usize) -> SegmentAnnotation {
        SegmentAnnotation { label: label.into(), start_frame: s, end_frame: e }
    }

    #[test]
    fn full_span_is_identity() {
        let c = clip(10);
        let out = segment(&c, &[ann("A", 0, 10)]).unwrap();
        assert_eq!(out, vec![("A".to_string(), c)]);
    }

    #[test]
    fn television_assembly_layout() {
        let c = clip(300);
        let anns = read_annotations("label,start_frame,end_frame\nTVA_1,0,90\nTVA_2,90,200\nTVA_3,210,300\n").unwrap();
        let out = segment(&c, &anns).unwrap();
        let labels: Vec<_> = out.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["TVA_1", "TVA_2", "TVA_3"]);
        assert_eq!(out[1].1.frame_count(), 110);
        assert_eq!(out[1].1.frame(0), c.frame(90));
        assert_eq!(out[2].1.frame_time, c.frame_time);
    }

    #[test]
    fn guards() {
        let c = clip(10);
        assert!(matches!(segment(&c, &[ann("A", 0, 6), ann("B", 5, 9)]), Err(PreprocessError::Overlap(_))));
        assert!(matches!(segment(&c, &[ann("A", 3, 11)]), Err(PreprocessError::Bounds(_))));
        assert!(matches!(segment(&c, &[ann("A", 4, 4)]), Err(PreprocessError::Bounds(_))));
        assert!(read_annotations("name,start,end\nA,0,1\n").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let anns = vec![ann("TVA_1", 0, 5), ann("TVA_2", 5, 9)];
        assert_eq!(read_annotations(&write_annotations(&anns)).unwrap(), anns);
    }
}
