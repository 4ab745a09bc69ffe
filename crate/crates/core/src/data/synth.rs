//! Procedural 28×28 glyphs. Each character is a template of polylines and
//! elliptic arcs in a `[-1, 1]²` box (y pointing down), distorted per sample
//! and rasterized with an anti-aliased distance test.
//!
//! Templates are shaped so that the interesting pairs stay close: `0` is a
//! slightly narrower `O`, `Q` is `O` with a tail, and `2` and `Z` share the
//! top/diagonal/bottom skeleton.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CharMap, Corpus, DataError, LabeledImages, PIXELS, SIDE};

pub const SYNTH_ALPHABET: &str = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";

/// Per-sample distortion ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlyphJitter {
    /// Translation in pixels, each axis uniform in `±shift`.
    pub shift: f64,
    /// Relative scale change per axis, uniform in `±scale`.
    pub scale: f64,
    pub thickness: (f64, f64),
    pub rotation_deg: f64,
    pub shear: f64,
    /// Displacement of every control point, in template units.
    pub wobble: f64,
}

impl Default for GlyphJitter {
    fn default() -> Self {
        Self {
            shift: 2.0,
            scale: 0.10,
            thickness: (1.0, 2.0),
            rotation_deg: 10.0,
            shear: 0.15,
            wobble: 0.08,
        }
    }
}

#[derive(Debug, Clone)]
enum Stroke {
    Poly(Vec<(f64, f64)>),
    /// Center, radii, start and end angle in degrees (y down, so 90° is the
    /// bottom of the ellipse). Sweeps from `a0` to `a1` in either direction.
    Arc((f64, f64), (f64, f64), f64, f64),
}

fn poly(points: &[(f64, f64)]) -> Stroke {
    Stroke::Poly(points.to_vec())
}

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, a0: f64, a1: f64) -> Stroke {
    Stroke::Arc((cx, cy), (rx, ry), a0, a1)
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64) -> Stroke {
    arc(cx, cy, rx, ry, 0.0, 360.0)
}

const O_RX: f64 = 0.58;
const ZERO_RX: f64 = 0.52;
const RY: f64 = 0.8;

fn template(c: char) -> Option<Vec<Stroke>> {
    let p_bowl = || {
        vec![
            poly(&[(-0.45, 0.8), (-0.45, -0.8), (0.1, -0.8)]),
            arc(0.1, -0.4, 0.38, 0.4, -90.0, 90.0),
            poly(&[(0.1, 0.0), (-0.45, 0.0)]),
        ]
    };
    let c_arc = || arc(0.0, 0.0, 0.52, RY, 40.0, 320.0);
    Some(match c {
        '0' => vec![ellipse(0.0, 0.0, ZERO_RX, RY)],
        '1' => vec![poly(&[(-0.25, -0.55), (0.0, -0.8), (0.0, 0.8)])],
        '2' => vec![poly(&[
            (-0.45, -0.55),
            (-0.2, -0.8),
            (0.25, -0.8),
            (0.5, -0.5),
            (0.42, -0.2),
            (-0.5, 0.8),
            (0.5, 0.8),
        ])],
        '3' => vec![
            arc(0.0, -0.4, 0.42, 0.4, -150.0, 90.0),
            arc(0.0, 0.4, 0.47, 0.4, -90.0, 150.0),
        ],
        '4' => vec![poly(&[(0.3, 0.8), (0.3, -0.8), (-0.5, 0.3), (0.55, 0.3)])],
        '5' => vec![
            poly(&[(0.45, -0.8), (-0.35, -0.8), (-0.4, -0.05)]),
            arc(0.0, 0.35, 0.47, 0.45, -140.0, 140.0),
        ],
        '6' => vec![
            poly(&[(0.35, -0.8), (-0.2, -0.35), (-0.45, 0.35)]),
            ellipse(0.0, 0.4, 0.45, 0.4),
        ],
        '7' => vec![poly(&[(-0.5, -0.8), (0.5, -0.8), (-0.1, 0.8)])],
        '8' => vec![ellipse(0.0, -0.42, 0.36, 0.38), ellipse(0.0, 0.4, 0.45, 0.4)],
        '9' => vec![
            ellipse(0.0, -0.4, 0.45, 0.4),
            poly(&[(0.45, -0.4), (0.3, 0.8)]),
        ],
        'A' => vec![
            poly(&[(-0.55, 0.8), (0.0, -0.8), (0.55, 0.8)]),
            poly(&[(-0.3, 0.15), (0.3, 0.15)]),
        ],
        'B' => vec![
            poly(&[(0.1, -0.8), (-0.45, -0.8), (-0.45, 0.8), (0.15, 0.8)]),
            arc(0.1, -0.4, 0.35, 0.4, -90.0, 90.0),
            arc(0.15, 0.4, 0.38, 0.4, -90.0, 90.0),
            poly(&[(-0.45, 0.0), (0.15, 0.0)]),
        ],
        'C' => vec![c_arc()],
        'D' => vec![
            poly(&[(-0.05, -0.8), (-0.45, -0.8), (-0.45, 0.8), (-0.05, 0.8)]),
            arc(-0.05, 0.0, 0.5, RY, -90.0, 90.0),
        ],
        'E' => vec![
            poly(&[(0.45, -0.8), (-0.45, -0.8), (-0.45, 0.8), (0.45, 0.8)]),
            poly(&[(-0.45, 0.0), (0.3, 0.0)]),
        ],
        'F' => vec![
            poly(&[(0.45, -0.8), (-0.45, -0.8), (-0.45, 0.8)]),
            poly(&[(-0.45, 0.0), (0.3, 0.0)]),
        ],
        'G' => vec![c_arc(), poly(&[(0.05, 0.1), (0.5, 0.1), (0.5, 0.55)])],
        'H' => vec![
            poly(&[(-0.45, -0.8), (-0.45, 0.8)]),
            poly(&[(0.45, -0.8), (0.45, 0.8)]),
            poly(&[(-0.45, 0.0), (0.45, 0.0)]),
        ],
        'I' => vec![
            poly(&[(0.0, -0.8), (0.0, 0.8)]),
            poly(&[(-0.3, -0.8), (0.3, -0.8)]),
            poly(&[(-0.3, 0.8), (0.3, 0.8)]),
        ],
        'J' => vec![
            poly(&[(-0.1, -0.8), (0.35, -0.8), (0.35, 0.4)]),
            arc(0.0, 0.4, 0.35, 0.4, 0.0, 180.0),
        ],
        'K' => vec![
            poly(&[(-0.45, -0.8), (-0.45, 0.8)]),
            poly(&[(0.45, -0.8), (-0.45, 0.1)]),
            poly(&[(-0.2, -0.1), (0.5, 0.8)]),
        ],
        'L' => vec![poly(&[(-0.4, -0.8), (-0.4, 0.8), (0.45, 0.8)])],
        'M' => vec![poly(&[(-0.55, 0.8), (-0.5, -0.8), (0.0, 0.3), (0.5, -0.8), (0.55, 0.8)])],
        'N' => vec![poly(&[(-0.45, 0.8), (-0.45, -0.8), (0.45, 0.8), (0.45, -0.8)])],
        'O' => vec![ellipse(0.0, 0.0, O_RX, RY)],
        'P' => p_bowl(),
        'Q' => vec![ellipse(0.0, 0.0, O_RX, RY), poly(&[(0.15, 0.4), (0.6, 0.9)])],
        'R' => {
            let mut s = p_bowl();
            s.push(poly(&[(-0.05, 0.0), (0.5, 0.8)]));
            s
        }
        'S' => vec![
            arc(0.0, -0.4, 0.45, 0.4, -20.0, -270.0),
            arc(0.0, 0.4, 0.47, 0.4, -90.0, 160.0),
        ],
        'T' => vec![poly(&[(-0.55, -0.8), (0.55, -0.8)]), poly(&[(0.0, -0.8), (0.0, 0.8)])],
        'U' => vec![
            poly(&[(-0.45, -0.8), (-0.45, 0.35)]),
            arc(0.0, 0.35, 0.45, 0.45, 180.0, 0.0),
            poly(&[(0.45, 0.35), (0.45, -0.8)]),
        ],
        'V' => vec![poly(&[(-0.5, -0.8), (0.0, 0.8), (0.5, -0.8)])],
        'W' => vec![poly(&[(-0.6, -0.8), (-0.3, 0.8), (0.0, -0.2), (0.3, 0.8), (0.6, -0.8)])],
        'X' => vec![poly(&[(-0.5, -0.8), (0.5, 0.8)]), poly(&[(0.5, -0.8), (-0.5, 0.8)])],
        'Y' => vec![
            poly(&[(-0.5, -0.8), (0.0, 0.0), (0.5, -0.8)]),
            poly(&[(0.0, 0.0), (0.0, 0.8)]),
        ],
        'Z' => vec![poly(&[(-0.5, -0.8), (0.5, -0.8), (-0.5, 0.8), (0.5, 0.8)])],
        _ => return None,
    })
}

fn u(rng: &mut ChaCha8Rng, half: f64) -> f64 {
    if half > 0.0 {
        rng.gen_range(-half..=half)
    } else {
        0.0
    }
}

/// Flattens strokes into polylines, wobbling control points.
fn polylines(strokes: &[Stroke], wobble: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<(f64, f64)>> {
    strokes
        .iter()
        .map(|s| match s {
            Stroke::Poly(pts) => pts
                .iter()
                .map(|&(x, y)| (x + u(rng, wobble), y + u(rng, wobble)))
                .collect(),
            Stroke::Arc((cx, cy), (rx, ry), a0, a1) => {
                let (cx, cy) = (cx + u(rng, wobble), cy + u(rng, wobble));
                let rx = rx * (1.0 + u(rng, wobble));
                let ry = ry * (1.0 + u(rng, wobble));
                let segs = (((a1 - a0).abs() / 15.0).ceil() as usize).max(4);
                (0..=segs)
                    .map(|k| {
                        let a = (a0 + (a1 - a0) * k as f64 / segs as f64) * PI / 180.0;
                        (cx + rx * a.cos(), cy + ry * a.sin())
                    })
                    .collect()
            }
        })
        .collect()
}

fn seg_dist(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx - px, a.1 + t * dy - py);
    (qx * qx + qy * qy).sqrt()
}

/// Renders one sample of `c`, drawing its distortion from `rng`.
pub fn render_glyph(c: char, jitter: &GlyphJitter, rng: &mut ChaCha8Rng) -> Result<Vec<u8>, DataError> {
    let strokes = template(c).ok_or(DataError::UnknownChar(c))?;
    let lines = polylines(&strokes, jitter.wobble, rng);
    let sx = 1.0 + u(rng, jitter.scale);
    let sy = 1.0 + u(rng, jitter.scale);
    let rot = u(rng, jitter.rotation_deg) * PI / 180.0;
    let shear = u(rng, jitter.shear);
    let tx = u(rng, jitter.shift);
    let ty = u(rng, jitter.shift);
    let width = rng.gen_range(jitter.thickness.0..=jitter.thickness.1);
    let (sin, cos) = rot.sin_cos();
    let half_extent = 9.5;
    let center = (SIDE as f64 - 1.0) / 2.0;
    let to_px = |(x, y): (f64, f64)| {
        let x = (x + shear * y) * sx;
        let y = y * sy;
        let (x, y) = (cos * x - sin * y, sin * x + cos * y);
        (center + x * half_extent + tx, center + y * half_extent + ty)
    };
    let segments: Vec<((f64, f64), (f64, f64))> = lines
        .iter()
        .flat_map(|l| {
            let pts: Vec<(f64, f64)> = l.iter().copied().map(to_px).collect();
            pts.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
        })
        .collect();
    let reach = width / 2.0 + 0.5;
    let mut img = vec![0u8; PIXELS];
    for r in 0..SIDE {
        for col in 0..SIDE {
            let (px, py) = (col as f64, r as f64);
            let d = segments
                .iter()
                .map(|&(a, b)| seg_dist(px, py, a, b))
                .fold(f64::INFINITY, f64::min);
            let v = (reach - d).clamp(0.0, 1.0);
            img[r * SIDE + col] = (v * 255.0).round() as u8;
        }
    }
    Ok(img)
}

fn class_of(c: char) -> Result<u32, DataError> {
    SYNTH_ALPHABET
        .find(c)
        .map(|i| i as u32)
        .ok_or(DataError::UnknownChar(c))
}

fn char_seed(seed: u64, c: char) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (c as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// `per_char` glyphs of each character, character-major. Labels are the
/// character's position in [`SYNTH_ALPHABET`].
pub fn synthetic_glyphs(chars: &[char], per_char: usize, seed: u64) -> Result<LabeledImages, DataError> {
    synthetic_glyphs_with(chars, per_char, seed, &GlyphJitter::default())
}

fn synthetic_glyphs_with(
    chars: &[char],
    per_char: usize,
    seed: u64,
    jitter: &GlyphJitter,
) -> Result<LabeledImages, DataError> {
    if per_char == 0 {
        return Err(DataError::Spec("per_char must be at least 1".into()));
    }
    let mut out = LabeledImages::default();
    for &c in chars {
        let class = class_of(c)?;
        let mut rng = ChaCha8Rng::seed_from_u64(char_seed(seed, c));
        for _ in 0..per_char {
            out.push(&render_glyph(c, jitter, &mut rng)?, class);
        }
    }
    Ok(out)
}

/// A train/test corpus over `chars` with independent draws per split.
pub fn synthetic_corpus(
    chars: &[char],
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<Corpus, DataError> {
    let train = synthetic_glyphs(chars, n_train, seed)?;
    let test = synthetic_glyphs(chars, n_test, seed ^ 0x5EED_7E57)?;
    let classes = CharMap::new(
        chars
            .iter()
            .map(|&c| class_of(c).map(|k| (c, k)))
            .collect::<Result<Vec<_>, _>>()?,
    );
    Ok(Corpus {
        train,
        test,
        classes,
    })
}
