//! Central finite-difference checks of the analytic gradients.

use super::loss::KlDirection;
use super::net::{Arch, ParamSet};
use super::train::{Example, Trainable};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct BlockCheck {
    pub name: &'static str,
    pub params: usize,
    pub analytic_norm: f64,
    /// ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖); 0 when both vanish.
    pub relative_error: f64,
    pub max_abs_error: f64,
}

/// Adds N(0, std²) noise to every parameter, so zero-initialized blocks
/// (the output projection) stop masking the gradients upstream of them.
pub fn randomize<P: ParamSet, R: Rng>(params: &mut P, std: f64, rng: &mut R) {
    let dist = Normal::new(0.0, std).expect("finite std");
    for m in params.blocks_mut() {
        for x in &mut m.data {
            *x += dist.sample(rng);
        }
    }
}

fn mean_loss<P: Trainable>(params: &P, arch: &Arch, examples: &[Example], dir: KlDirection, eps: f64) -> f64 {
    examples.iter().map(|ex| params.example_loss(arch, ex, dir, eps)).sum::<f64>() / examples.len() as f64
}

/// Compares the mean-loss gradient over `examples` with central differences of step `h`.
pub fn gradient_check<P: Trainable>(
    params: &P,
    arch: &Arch,
    examples: &[Example],
    dir: KlDirection,
    eps: f64,
    h: f64,
) -> Vec<BlockCheck> {
    let mut analytic = params.zeros_like();
    for ex in examples {
        params.example_grad(arch, ex, dir, eps, &mut analytic);
    }
    let inv = 1.0 / examples.len() as f64;
    analytic.blocks_mut().into_iter().for_each(|m| m.scale(inv));

    let names: Vec<&'static str> = params.blocks().iter().map(|(n, _)| *n).collect();
    let mut out = Vec::with_capacity(names.len());
    let mut probe = params.clone();
    for (b, name) in names.into_iter().enumerate() {
        let a = &analytic.blocks()[b].1.data.clone();
        let mut numeric = vec![0.0; a.len()];
        for (i, num) in numeric.iter_mut().enumerate() {
            let orig = probe.blocks()[b].1.data[i];
            probe.blocks_mut()[b].data[i] = orig + h;
            let plus = mean_loss(&probe, arch, examples, dir, eps);
            probe.blocks_mut()[b].data[i] = orig - h;
            let minus = mean_loss(&probe, arch, examples, dir, eps);
            probe.blocks_mut()[b].data[i] = orig;
            *num = (plus - minus) / (2.0 * h);
        }
        let diff: f64 = a.iter().zip(&numeric).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = na.max(nn);
        out.push(BlockCheck {
            name,
            params: a.len(),
            analytic_norm: na,
            relative_error: if scale > 0.0 { diff / scale } else { 0.0 },
            max_abs_error: a.iter().zip(&numeric).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        });
    }
    out
}
