#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gomkit_core::bvh::{write_bvh, Axis, Channel, JointNode, MotionClip, Skeleton};
use gomkit_core::gom::ChainSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FS: f64 = 90.0;
pub const CLASSES: [&str; 3] = ["APA_1", "APA_2", "APA_3"];

fn rotations() -> Vec<Channel> {
    vec![Channel::Rotation(Axis::Z), Channel::Rotation(Axis::X), Channel::Rotation(Axis::Y)]
}

/// Skeleton whose joints carry the sensor labels, plus a `Prop` joint.
pub fn skeleton() -> Skeleton<f64> {
    let mut joints: Vec<JointNode<f64>> = Vec::new();
    let add = |joints: &mut Vec<JointNode<f64>>, name: &str, parent: Option<usize>, channels: Vec<Channel>| {
        let i = joints.len();
        joints.push(JointNode { name: name.into(), offset: [0.0, 10.0, 0.0], channels, parent, children: vec![], end_site: false });
        if let Some(p) = parent {
            joints[p].children.push(i);
        }
        i
    };
    let mut root_channels = vec![Channel::Position(Axis::X), Channel::Position(Axis::Y), Channel::Position(Axis::Z)];
    root_channels.extend(rotations());
    let root = add(&mut joints, "H", None, root_channels);
    let chains = ChainSpec::default();
    for limb in &chains.limbs {
        let mut parent = root;
        for s in &limb.sensors {
            if s == "H" {
                continue;
            }
            if limb.name.ends_with("arm") && parent == root {
                parent = joints.iter().position(|j| j.name == "SP3").expect("spine before arms");
            }
            parent = add(&mut joints, s, Some(parent), rotations());
        }
        let end = add(&mut joints, "", Some(parent), vec![]);
        joints[end].end_site = true;
    }
    let prop = add(&mut joints, "Prop", Some(root), rotations());
    let end = add(&mut joints, "", Some(prop), vec![]);
    joints[end].end_site = true;
    Skeleton::new(joints, root).expect("valid skeleton")
}

/// Per-channel sinusoid frequency (Hz) for a class; distinct within a class.
fn frequency(class: usize, channel: usize) -> f64 {
    0.2 + 0.02 * channel as f64 + 0.007 * class as f64
}

/// Motion whose every rotation channel is a zero-mean sinusoid, so each
/// descriptor follows its own second-order recursion exactly.
pub fn clip(skeleton: &Skeleton<f64>, class: usize, frames: usize, rng: &mut ChaCha8Rng) -> MotionClip<f64> {
    let n = skeleton.channel_count();
    let params: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(10.0..40.0), rng.gen_range(0.0..TAU))).collect();
    let prop_col = skeleton.channel_offsets()[skeleton.find_joint("Prop").unwrap()] + 2;
    let mut data = Vec::with_capacity(n * frames);
    for t in 0..frames {
        let s = t as f64 / FS;
        for c in 0..n {
            let v = if c < 3 {
                [0.0, 95.0, 0.0][c]
            } else if c == prop_col {
                // swings across the ±180 seam
                let a = 170.0 + 30.0 * (TAU * 0.3 * s).sin();
                a - 360.0 * ((a + 180.0) / 360.0).floor()
            } else {
                let (amp, phase) = params[c];
                amp * (TAU * frequency(class, c) * s + phase).sin()
            };
            data.push(v);
        }
    }
    MotionClip::new(skeleton.fingerprint(), 1.0 / FS, n, data).unwrap()
}

/// APA-like recordings: three whole-file repetitions per class and one
/// annotated session holding two more APA_2 repetitions and an unlabelled span.
pub fn write_dataset(dir: &Path, seed: u64) {
    let sk = skeleton();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir.join("operator1")).unwrap();
    for (c, class) in CLASSES.iter().enumerate() {
        for k in 0..3 {
            let frames = 420 + 15 * k;
            let text = write_bvh(&sk, &clip(&sk, c, frames, &mut rng)).unwrap();
            std::fs::write(dir.join("operator1").join(format!("{class}_rep{k}.bvh")), text).unwrap();
        }
    }
    let session = clip(&sk, 1, 1200, &mut rng);
    std::fs::write(dir.join("session.bvh"), write_bvh(&sk, &session).unwrap()).unwrap();
    std::fs::write(
        dir.join("session.csv"),
        "label,start_frame,end_frame\nAPA_2,0,400\npause,400,700\nAPA_2,700,1150\n",
    )
    .unwrap();
}

pub fn write_config(dir: &Path, data: &Path, out: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "dataset = \"APA\"\ndata_dir = {:?}\nout_dir = {:?}\n{extra}\n[hmm]\nstates = 3\nfolds = 3\nseed = 7\n",
        data.display().to_string(),
        out.display().to_string()
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub fn gomkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gomkit")).args(args).output().expect("binary runs")
}

pub fn stage(name: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![name, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    gomkit(&args)
}

pub fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
