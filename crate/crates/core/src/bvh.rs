//! Biovision Hierarchy (BVH) reading and writing.
//!
//! A BVH document has a `HIERARCHY` section describing the skeleton as a tree
//! of joints, each with an offset and an ordered channel list, followed by a
//! `MOTION` section holding one line of channel values per frame.
//!
//! ```text
//! HIERARCHY
//! ROOT Hips
//! {
//!     OFFSET 0 0 0
//!     CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
//!     JOINT Spine
//!     { ... }
//! }
//! MOTION
//! Frames: 2
//! Frame Time: 0.011111
//! ...
//! ```
//!
//! Rotation values are kept verbatim (degrees, no re-wrapping). Joint angle
//! descriptors are addressed by a sensor label plus an axis, see
//! [`DescriptorId`] and [`SensorMap`].

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvhError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("structure error: {0}")]
    Structure(String),
    #[error("MOTION section declares zero frames")]
    EmptyMotion,
    #[error("clip has {found} channels but skeleton declares {expected}")]
    Binding { expected: usize, found: usize },
    #[error("unknown descriptor {0}")]
    UnknownDescriptor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn lower(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl FromStr for Axis {
    type Err = BvhError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            _ => Err(BvhError::UnknownDescriptor(format!("bad axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Position(Axis),
    Rotation(Axis),
}

impl Channel {
    fn parse(token: &str) -> Option<Self> {
        let lower = token.to_ascii_lowercase();
        let (axis, kind) = lower.split_at(1);
        let axis = axis.parse().ok()?;
        match kind {
            "position" => Some(Channel::Position(axis)),
            "rotation" => Some(Channel::Rotation(axis)),
            _ => None,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (axis, kind) = match self {
            Channel::Position(a) => (a, "position"),
            Channel::Rotation(a) => (a, "rotation"),
        };
        let axis = match axis {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        };
        write!(f, "{axis}{kind}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointNode<T> {
    pub name: String,
    /// Offset from the parent joint, in centimetres.
    pub offset: [T; 3],
    pub channels: Vec<Channel>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub end_site: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton<T> {
    joints: Vec<JointNode<T>>,
    root_index: usize,
}

impl<T: Scalar> Skeleton<T> {
    /// Builds a skeleton from a joint list, validating the tree structure.
    pub fn new(joints: Vec<JointNode<T>>, root_index: usize) -> Result<Self, BvhError> {
        let skel = Self { joints, root_index };
        skel.validate()?;
        Ok(skel)
    }

    fn validate(&self) -> Result<(), BvhError> {
        let n = self.joints.len();
        if n == 0 || self.root_index >= n {
            return Err(BvhError::Structure("skeleton has no root".into()));
        }
        let roots: Vec<_> = (0..n).filter(|&i| self.joints[i].parent.is_none()).collect();
        if roots != [self.root_index] {
            return Err(BvhError::Structure(format!("expected exactly one root, found {}", roots.len())));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if j.end_site && !j.channels.is_empty() {
                return Err(BvhError::Structure(format!("end site {i} carries channels")));
            }
            for &c in &j.children {
                if c >= n || self.joints[c].parent != Some(i) {
                    return Err(BvhError::Structure(format!("broken parent link at joint {c}")));
                }
            }
            if let Some(p) = j.parent {
                if p >= n || !self.joints[p].children.contains(&i) {
                    return Err(BvhError::Structure(format!("broken child link at joint {i}")));
                }
            }
        }
        // reachability from root implies a connected acyclic tree given the links above
        let mut seen = vec![false; n];
        let mut stack = vec![self.root_index];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(BvhError::Structure("cycle in joint hierarchy".into()));
            }
            stack.extend(&self.joints[i].children);
        }
        if seen.iter().any(|s| !s) {
            return Err(BvhError::Structure("disconnected joints".into()));
        }
        Ok(())
    }

    pub fn joints(&self) -> &[JointNode<T>] {
        &self.joints
    }

    pub fn root_index(&self) -> usize {
        self.root_index
    }

    pub fn channel_count(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    /// First motion column of each joint, in joint order.
    pub fn channel_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.joints
            .iter()
            .map(|j| {
                let start = acc;
                acc += j.channels.len();
                start
            })
            .collect()
    }

    pub fn find_joint(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| !j.end_site && j.name == name)
    }

    /// Motion column of a joint's rotation channel about `axis`.
    pub fn rotation_column(&self, joint: usize, axis: Axis) -> Option<usize> {
        let start = self.channel_offsets()[joint];
        self.joints[joint]
            .channels
            .iter()
            .position(|&c| c == Channel::Rotation(axis))
            .map(|k| start + k)
    }

    /// Identifier binding clips to this skeleton: joint names and channel layout.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        for j in &self.joints {
            let _ = write!(s, "{}:{};", j.name, j.channels.len());
        }
        format!("{:016x}", fnv1a(s.as_bytes()))
    }

    /// Copy of the skeleton with one channel removed from `joint`.
    pub fn without_channel(&self, joint: usize, channel: usize) -> Self {
        let mut out = self.clone();
        out.joints[joint].channels.remove(channel);
        out
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325_u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Frame-by-frame channel values bound to a skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip<T> {
    pub skeleton_ref: String,
    /// Seconds per frame.
    pub frame_time: T,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> MotionClip<T> {
    pub fn new(skeleton_ref: String, frame_time: T, channels: usize, data: Vec<T>) -> Result<Self, BvhError> {
        if !(frame_time > T::zero()) {
            return Err(BvhError::Structure("frame time must be positive".into()));
        }
        if channels == 0 || !data.len().is_multiple_of(channels) {
            return Err(BvhError::Structure(format!(
                "{} values do not form rows of {channels} channels",
                data.len()
            )));
        }
        if data.is_empty() {
            return Err(BvhError::EmptyMotion);
        }
        Ok(Self { skeleton_ref, frame_time, channels, data })
    }

    pub fn frame_count(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn frame(&self, t: usize) -> &[T] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.frame_count()).map(|t| self.data[t * self.channels + c]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[T]) {
        assert_eq!(values.len(), self.frame_count(), "column length");
        for (t, &v) in values.iter().enumerate() {
            self.data[t * self.channels + c] = v;
        }
    }

    pub fn sample_rate_hz(&self) -> T {
        T::one() / self.frame_time
    }

    /// Frames `[start, end)` as a new clip with the same binding.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            skeleton_ref: self.skeleton_ref.clone(),
            frame_time: self.frame_time,
            channels: self.channels,
            data: self.data[start * self.channels..end * self.channels].to_vec(),
        }
    }

    pub fn is_bound_to(&self, skeleton: &Skeleton<T>) -> bool {
        self.channels == skeleton.channel_count()
    }
}

/// One joint-angle motion descriptor: a sensor label and a rotation axis, e.g. `RA.y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DescriptorId {
    pub sensor: String,
    pub axis: Axis,
}

impl DescriptorId {
    pub fn new(sensor: impl Into<String>, axis: Axis) -> Self {
        Self { sensor: sensor.into(), axis }
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.sensor, self.axis.lower())
    }
}

impl FromStr for DescriptorId {
    type Err = BvhError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (sensor, axis) = s
            .rsplit_once('.')
            .ok_or_else(|| BvhError::UnknownDescriptor(format!("expected SENSOR.axis, got {s:?}")))?;
        if sensor.is_empty() {
            return Err(BvhError::UnknownDescriptor(s.to_string()));
        }
        Ok(Self::new(sensor, axis.parse()?))
    }
}

impl Serialize for DescriptorId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DescriptorId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Maps sensor labels to candidate BVH joint names.
///
/// A joint named exactly like the label always resolves; otherwise the
/// candidates are tried in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorMap {
    pub candidates: BTreeMap<String, Vec<String>>,
}

impl Default for SensorMap {
    fn default() -> Self {
        let table: &[(&str, &[&str])] = &[
            ("H", &["Hips", "Hip", "Pelvis"]),
            ("SP1", &["Spine", "Spine1"]),
            ("SP2", &["Spine1", "Spine2"]),
            ("SP3", &["Spine2", "Spine3", "Chest"]),
            ("N", &["Neck", "Neck1"]),
            ("HE", &["Head"]),
            ("RSH1", &["RightShoulder", "RightShoulder1", "RightCollar"]),
            ("RSH2", &["RightShoulder2", "RightScapula", "RightClavicle"]),
            ("RA", &["RightArm", "RightUpperArm"]),
            ("RFA", &["RightForeArm", "RightLowerArm"]),
            ("LSH1", &["LeftShoulder", "LeftShoulder1", "LeftCollar"]),
            ("LSH2", &["LeftShoulder2", "LeftScapula", "LeftClavicle"]),
            ("LA", &["LeftArm", "LeftUpperArm"]),
            ("LFA", &["LeftForeArm", "LeftLowerArm"]),
            ("RUL", &["RightUpLeg", "RightThigh", "RightUpperLeg"]),
            ("RL", &["RightLeg", "RightShin", "RightLowerLeg"]),
            ("LUL", &["LeftUpLeg", "LeftThigh", "LeftUpperLeg"]),
            ("LL", &["LeftLeg", "LeftShin", "LeftLowerLeg"]),
        ];
        Self {
            candidates: table
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }
}

impl SensorMap {
    pub fn resolve_joint<T: Scalar>(&self, skeleton: &Skeleton<T>, sensor: &str) -> Option<usize> {
        skeleton.find_joint(sensor).or_else(|| {
            self.candidates
                .get(sensor)?
                .iter()
                .find_map(|name| skeleton.find_joint(name))
        })
    }

    /// Motion column holding the descriptor's rotation channel.
    pub fn resolve<T: Scalar>(&self, skeleton: &Skeleton<T>, id: &DescriptorId) -> Result<usize, BvhError> {
        let joint = self
            .resolve_joint(skeleton, &id.sensor)
            .ok_or_else(|| BvhError::UnknownDescriptor(id.to_string()))?;
        skeleton
            .rotation_column(joint, id.axis)
            .ok_or_else(|| BvhError::UnknownDescriptor(format!("{id}: joint has no rotation channel on that axis")))
    }
}

/// Returns the angle series (degrees) of one descriptor, in frame order.
pub fn extract_descriptor<T: Scalar>(
    skeleton: &Skeleton<T>,
    clip: &MotionClip<T>,
    id: &DescriptorId,
    sensors: &SensorMap,
) -> Result<Vec<T>, BvhError> {
    if !clip.is_bound_to(skeleton) {
        return Err(BvhError::Binding { expected: skeleton.channel_count(), found: clip.channel_count() });
    }
    let col = sensors.resolve(skeleton, id)?;
    Ok(clip.column(col))
}

struct Token<'a> {
    text: &'a str,
    line: usize,
}

struct Tokens<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(lines: &[(usize, &'a str)]) -> Self {
        let mut tokens = Vec::new();
        for &(line, text) in lines {
            for word in text.split_whitespace() {
                // braces glued to names are split off
                let mut rest = word;
                while !rest.is_empty() {
                    let cut = rest.find(['{', '}']).unwrap_or(rest.len());
                    if cut == 0 {
                        tokens.push(Token { text: &rest[..1], line });
                        rest = &rest[1..];
                    } else {
                        tokens.push(Token { text: &rest[..cut], line });
                        rest = &rest[cut..];
                    }
                }
            }
        }
        let last_line = lines.last().map_or(1, |l| l.0);
        Self { tokens, pos: 0, last_line }
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<&Token<'a>, BvhError> {
        let line = self.last_line;
        let tok = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| BvhError::Syntax { line, message: "unexpected end of hierarchy".into() })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect(&mut self, word: &str) -> Result<usize, BvhError> {
        let tok = self.next()?;
        if tok.text.eq_ignore_ascii_case(word) {
            Ok(tok.line)
        } else {
            Err(BvhError::Syntax { line: tok.line, message: format!("expected {word:?}, found {:?}", tok.text) })
        }
    }

    fn number<T: Scalar>(&mut self) -> Result<T, BvhError> {
        let tok = self.next()?;
        parse_number(tok.text, tok.line)
    }
}

fn parse_number<T: Scalar>(text: &str, line: usize) -> Result<T, BvhError> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .and_then(T::from_f64)
        .ok_or_else(|| BvhError::Syntax { line, message: format!("invalid number {text:?}") })
}

fn parse_joint<T: Scalar>(
    toks: &mut Tokens<'_>,
    joints: &mut Vec<JointNode<T>>,
    parent: Option<usize>,
    end_site: bool,
) -> Result<usize, BvhError> {
    let name = if end_site {
        "End Site".to_string()
    } else {
        let mut parts = Vec::new();
        while let Some(t) = toks.peek() {
            if t.text == "{" {
                break;
            }
            parts.push(t.text.to_string());
            toks.pos += 1;
        }
        if parts.is_empty() {
            let line = toks.peek().map_or(toks.last_line, |t| t.line);
            return Err(BvhError::Syntax { line, message: "joint without a name".into() });
        }
        parts.join(" ")
    };
    toks.expect("{")?;
    toks.expect("OFFSET")?;
    let offset = [toks.number()?, toks.number()?, toks.number()?];
    let index = joints.len();
    joints.push(JointNode { name, offset, channels: Vec::new(), parent, children: Vec::new(), end_site });
    if let Some(p) = parent {
        joints[p].children.push(index);
    }
    if end_site {
        toks.expect("}")?;
        return Ok(index);
    }
    let line = toks.expect("CHANNELS")?;
    let count_tok = toks.next()?;
    let count: usize = count_tok
        .text
        .parse()
        .map_err(|_| BvhError::Syntax { line, message: format!("invalid channel count {:?}", count_tok.text) })?;
    for _ in 0..count {
        let tok = toks.next()?;
        let ch = Channel::parse(tok.text)
            .ok_or_else(|| BvhError::Syntax { line: tok.line, message: format!("unknown channel {:?}", tok.text) })?;
        if joints[index].channels.contains(&ch) {
            return Err(BvhError::Syntax { line: tok.line, message: format!("duplicate channel {ch}") });
        }
        joints[index].channels.push(ch);
    }
    loop {
        let tok = toks.next()?;
        let line = tok.line;
        match tok.text {
            "}" => return Ok(index),
            t if t.eq_ignore_ascii_case("JOINT") => {
                parse_joint(toks, joints, Some(index), false)?;
            }
            t if t.eq_ignore_ascii_case("End") => {
                toks.expect("Site")?;
                parse_joint(toks, joints, Some(index), true)?;
            }
            t if t.eq_ignore_ascii_case("ROOT") => {
                return Err(BvhError::Structure(format!("nested ROOT at line {line}")));
            }
            other => {
                return Err(BvhError::Syntax { line, message: format!("unexpected token {other:?} in joint block") })
            }
        }
    }
}

/// Parses a complete BVH document.
pub fn parse_bvh<T: Scalar>(text: &str) -> Result<(Skeleton<T>, MotionClip<T>), BvhError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let motion_at = lines
        .iter()
        .position(|(_, l)| l.eq_ignore_ascii_case("MOTION"))
        .ok_or_else(|| BvhError::Syntax { line: lines.last().map_or(1, |l| l.0), message: "missing MOTION section".into() })?;

    let mut toks = Tokens::new(&lines[..motion_at]);
    toks.expect("HIERARCHY")?;
    let mut joints = Vec::new();
    let mut root = None;
    while let Some(tok) = toks.peek() {
        let line = tok.line;
        if !tok.text.eq_ignore_ascii_case("ROOT") {
            return Err(BvhError::Syntax { line, message: format!("expected ROOT, found {:?}", tok.text) });
        }
        if root.is_some() {
            return Err(BvhError::Structure(format!("multiple roots (second ROOT at line {line})")));
        }
        toks.pos += 1;
        root = Some(parse_joint(&mut toks, &mut joints, None, false)?);
    }
    let root = root.ok_or_else(|| BvhError::Syntax { line: lines[motion_at].0, message: "no ROOT joint".into() })?;
    let skeleton = Skeleton::new(joints, root)?;
    let channels = skeleton.channel_count();

    let mut rest = lines[motion_at + 1..].iter();
    let (line, frames_line) = rest
        .next()
        .ok_or_else(|| BvhError::Syntax { line: lines[motion_at].0, message: "missing Frames: header".into() })?;
    let frames: usize = header_value(frames_line, "Frames:")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| BvhError::Syntax { line: *line, message: format!("bad Frames header {frames_line:?}") })?;
    let (line, time_line) = rest
        .next()
        .ok_or_else(|| BvhError::Syntax { line: *line, message: "missing Frame Time: header".into() })?;
    let frame_time: T = header_value(time_line, "Frame Time:")
        .ok_or_else(|| BvhError::Syntax { line: *line, message: format!("bad Frame Time header {time_line:?}") })
        .and_then(|v| parse_number(v, *line))?;
    if frames == 0 {
        return Err(BvhError::EmptyMotion);
    }
    if channels == 0 {
        return Err(BvhError::Structure("skeleton declares no channels".into()));
    }

    let mut data = Vec::with_capacity(frames * channels);
    let mut seen = 0;
    for (line, row) in rest {
        let before = data.len();
        for word in row.split_whitespace() {
            data.push(parse_number::<T>(word, *line)?);
        }
        let got = data.len() - before;
        if got != channels {
            return Err(BvhError::Structure(format!(
                "frame {seen} (line {line}) has {got} values, expected {channels}"
            )));
        }
        seen += 1;
    }
    if seen != frames {
        return Err(BvhError::Structure(format!("Frames header says {frames}, found {seen} rows")));
    }
    let clip = MotionClip::new(skeleton.fingerprint(), frame_time, channels, data)?;
    Ok((skeleton, clip))
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let (head, tail) = line.split_at_checked(key.len())?;
    head.eq_ignore_ascii_case(key).then(|| tail.trim())
}

/// Serialises a skeleton and clip: tab indentation, 6 decimals, one frame per line.
pub fn write_bvh<T: Scalar>(skeleton: &Skeleton<T>, clip: &MotionClip<T>) -> Result<String, BvhError> {
    if !clip.is_bound_to(skeleton) {
        return Err(BvhError::Binding { expected: skeleton.channel_count(), found: clip.channel_count() });
    }
    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, skeleton, skeleton.root_index(), 0);
    out.push_str("MOTION\n");
    let _ = writeln!(out, "Frames: {}", clip.frame_count());
    let _ = writeln!(out, "Frame Time: {:.8}", clip.frame_time.to_f64_lossy());
    for t in 0..clip.frame_count() {
        let mut first = true;
        for v in clip.frame(t) {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{:.6}", v.to_f64_lossy());
        }
        out.push('\n');
    }
    Ok(out)
}

fn write_joint<T: Scalar>(out: &mut String, skeleton: &Skeleton<T>, index: usize, depth: usize) {
    let j = &skeleton.joints()[index];
    let pad = "\t".repeat(depth);
    if j.end_site {
        let _ = writeln!(out, "{pad}End Site");
    } else if j.parent.is_none() {
        let _ = writeln!(out, "{pad}ROOT {}", j.name);
    } else {
        let _ = writeln!(out, "{pad}JOINT {}", j.name);
    }
    let _ = writeln!(out, "{pad}{{");
    let _ = writeln!(
        out,
        "{pad}\tOFFSET {:.6} {:.6} {:.6}",
        j.offset[0].to_f64_lossy(),
        j.offset[1].to_f64_lossy(),
        j.offset[2].to_f64_lossy()
    );
    if !j.end_site {
        let _ = write!(out, "{pad}\tCHANNELS {}", j.channels.len());
        for c in &j.channels {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    for &c in &j.children {
        write_joint(out, skeleton, c, depth + 1);
    }
    let _ = writeln!(out, "{pad}}}");
}
