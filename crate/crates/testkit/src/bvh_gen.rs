use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;

/// Random BVH document with at most `max_joints` named joints and `max_frames` frames.
///
/// Returns the text together with the joint count, channel count and frame count.
pub fn random_bvh<R: Rng>(rng: &mut R, max_joints: usize, max_frames: usize) -> (String, usize, usize, usize) {
    let joints = rng.gen_range(1..=max_joints);
    // parent[i] < i: random tree
    let parents: Vec<Option<usize>> = (0..joints).map(|i| if i == 0 { None } else { Some(rng.gen_range(0..i)) }).collect();
    let mut children = vec![Vec::new(); joints];
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(i);
        }
    }
    let mut channels = vec![Vec::new(); joints];
    for (i, ch) in channels.iter_mut().enumerate() {
        let mut rot = vec!["Xrotation", "Yrotation", "Zrotation"];
        rot.shuffle(rng);
        if i == 0 || rng.gen_bool(0.1) {
            let mut pos = vec!["Xposition", "Yposition", "Zposition"];
            pos.shuffle(rng);
            ch.extend(pos);
        }
        ch.extend(rot);
    }
    let total: usize = channels.iter().map(Vec::len).sum();
    let mut text = String::from("HIERARCHY\n");
    fn emit<R: Rng>(
        rng: &mut R,
        out: &mut String,
        i: usize,
        depth: usize,
        children: &[Vec<usize>],
        channels: &[Vec<&str>],
    ) {
        let pad = "  ".repeat(depth);
        let kw = if depth == 0 { "ROOT" } else { "JOINT" };
        let off: Vec<f64> = (0..3).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let _ = writeln!(out, "{pad}{kw} joint_{i}\n{pad}{{");
        let _ = writeln!(out, "{pad}  OFFSET {} {} {}", off[0], off[1], off[2]);
        let _ = writeln!(out, "{pad}  CHANNELS {} {}", channels[i].len(), channels[i].join(" "));
        if children[i].is_empty() {
            let _ = writeln!(out, "{pad}  End Site\n{pad}  {{\n{pad}    OFFSET 0 {} 0\n{pad}  }}", rng.gen_range(1.0..20.0));
        }
        for &c in &children[i] {
            emit(rng, out, c, depth + 1, children, channels);
        }
        let _ = writeln!(out, "{pad}}}");
    }
    emit(rng, &mut text, 0, 0, &children, &channels);
    let frames = rng.gen_range(1..=max_frames);
    let _ = writeln!(text, "MOTION\nFrames: {frames}\nFrame Time: {}", 1.0 / rng.gen_range(30.0..240.0));
    for _ in 0..frames {
        let row: Vec<String> = (0..total).map(|_| rng.gen_range(-180.0..180.0f64).to_string()).collect();
        let _ = writeln!(text, "{}", row.join(" "));
    }
    (text, joints, total, frames)
}
