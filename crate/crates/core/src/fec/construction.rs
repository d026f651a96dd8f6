//! Frozen-set design by Gaussian approximation of density evolution.
//!
//! Every synthetic channel is tracked by the mean of its (symmetric Gaussian)
//! LLR. Check-node combining uses Chung's `phi` approximation, evaluated in
//! the log domain so reliable channels do not underflow.

use std::f64::consts::PI;

/// Mean LLR of a position that is known to the decoder (shortened).
const KNOWN_MEAN: f64 = 1e6;

/// `ln phi(x)` with `phi(x) = E[tanh]`-complement of an `N(x, 2x)` LLR.
fn ln_phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < 0.867_861 {
        // Chung's form exceeds phi = 1 near zero, which collapses all weak
        // channels onto the same mean; this branch keeps them ordered.
        0.0564 * x * x - 0.4856 * x
    } else if x < 10.0 {
        -0.4527 * x.powf(0.86) + 0.0218
    } else {
        0.5 * (PI / x).ln() - x / 4.0 + (1.0 - 10.0 / (7.0 * x)).ln()
    }
}

fn inv_ln_phi(target: f64) -> f64 {
    if target >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while ln_phi(hi) > target {
        hi *= 2.0;
        if hi > 4.0 * KNOWN_MEAN {
            return hi;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ln_phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean of the check-node combination of two channels.
fn check_mean(a: f64, b: f64) -> f64 {
    let (la, lb) = (ln_phi(a), ln_phi(b));
    let (hi, lo) = if la >= lb { (la, lb) } else { (lb, la) };
    // ln(phi_a + phi_b - phi_a phi_b)
    let v = hi + (1.0 + (lo - hi).exp() - lo.exp()).max(f64::MIN_POSITIVE).ln();
    inv_ln_phi(v)
}

fn evolve(means: &[f64], out: &mut Vec<f64>) {
    if means.len() == 1 {
        out.push(means[0]);
        return;
    }
    let h = means.len() / 2;
    let (a, b) = means.split_at(h);
    let upper: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| check_mean(x, y)).collect();
    let lower: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x + y).collect();
    evolve(&upper, out);
    evolve(&lower, out);
}

/// Code-bit positions removed by shortening: the bit-reversal images of
/// the last `n_mother - transmitted` indices. The set is closed under
/// bitwise supersets, so freezing the same bit-channels to zero forces these
/// code bits to zero.
pub fn shortened_positions(n_mother: usize, transmitted: usize) -> Vec<bool> {
    let bits = n_mother.trailing_zeros();
    let mut mask = vec![false; n_mother];
    for j in transmitted..n_mother {
        let r = if bits == 0 { 0 } else { j.reverse_bits() >> (usize::BITS - bits) };
        mask[r] = true;
    }
    mask
}

/// Mean LLR of every bit-channel `u_i` (natural order) when the unshortened
/// code bits see the given channel mean.
pub fn bit_channel_means(shortened: &[bool], channel_mean: f64) -> Vec<f64> {
    let leaves: Vec<f64> = shortened.iter().map(|&s| if s { KNOWN_MEAN } else { channel_mean }).collect();
    let mut out = Vec::with_capacity(shortened.len());
    evolve(&leaves, &mut out);
    out
}

/// Indices (ascending) of the `k` most reliable bit-channels outside the
/// shortened set, designed for the given Es/N0.
pub fn information_set(shortened: &[bool], k: usize, design_snr_db: f64) -> Vec<usize> {
    // QPSK/BPSK bit LLR mean is 2 Es/N0 for unit-power QPSK.
    let channel_mean = 2.0 * 10f64.powf(design_snr_db / 10.0);
    let means = bit_channel_means(shortened, channel_mean);
    let mut order: Vec<usize> = (0..shortened.len()).filter(|&i| !shortened[i]).collect();
    order.sort_by(|&i, &j| means[j].total_cmp(&means[i]).then(i.cmp(&j)));
    let mut set: Vec<usize> = order.into_iter().take(k).collect();
    set.sort_unstable();
    set
}
