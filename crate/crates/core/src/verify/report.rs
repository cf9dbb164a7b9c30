use std::fmt;

use super::{IntervalTensor, Verdict, Verification};

/// Outward-rounded pixel interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRange {
    pub lo: u32,
    pub hi: u32,
}

impl fmt::Display for PixelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} -- {}]", self.lo, self.hi)
    }
}

/// Maps tanh-range bounds to pixels `(v + 1) * side / 2`, flooring lower
/// and ceiling upper bounds, clamped to `[0, side]`.
pub fn denormalize_bounds(bounds: &IntervalTensor, side: usize) -> Vec<PixelRange> {
    let half = side as f64 / 2.0;
    let px = |v: f32| (v as f64 + 1.0) * half;
    let clamp = |p: f64| p.clamp(0.0, side as f64) as u32;
    bounds
        .lower()
        .data()
        .iter()
        .zip(bounds.upper().data())
        .map(|(&l, &u)| PixelRange {
            lo: clamp(px(l).floor()),
            hi: clamp(px(u).ceil()),
        })
        .collect()
}

/// Plain-text verdict report: `result:` and `time:` lines, then details.
pub fn render_report(
    v: &Verification,
    seconds: f64,
    counterexample_file: Option<&str>,
    side: usize,
) -> String {
    let mut out = format!("result: {}\ntime: {seconds:.6}\n", v.verdict.label());
    let ranges: Vec<String> = denormalize_bounds(&v.bounds, side)
        .iter()
        .map(|r| r.to_string())
        .collect();
    out.push_str(&format!("bounds: {}\n", ranges.join(" ")));
    for i in 0..v.bounds.len() {
        out.push_str(&format!(
            "output[{i}]: [{}, {}] centre {}\n",
            v.bounds.lower().data()[i],
            v.bounds.upper().data()[i],
            v.center_output.data()[i]
        ));
    }
    out.push_str(&format!("boxes: {}\n", v.boxes));
    if let Verdict::Falsified { violation, .. } = &v.verdict {
        out.push_str(&format!("violation: {violation}\n"));
        if let Some(path) = counterexample_file {
            out.push_str(&format!("counterexample: {path}\n"));
        }
    }
    out
}
