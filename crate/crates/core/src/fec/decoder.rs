//! Successive-cancellation list decoding over the whole list at once.
//!
//! Each recursion level receives the LLRs of every surviving path stacked
//! path-major and returns the re-encoded partial codewords of the paths that
//! survive its subtree together with the index of the path each one descends
//! from. Check-node updates use the exact box-plus and the path metric is
//! the exact log-likelihood penalty, so LLRs must be properly scaled.

/// LLR fed for shortened (known-zero) code bits.
pub(super) const KNOWN_LLR: f64 = 1e12;

struct Tree {
    /// `frozen_prefix[i]` = number of frozen bit-channels below `i`.
    frozen_prefix: Vec<usize>,
    list_size: usize,
}

impl Tree {
    fn all_frozen(&self, offset: usize, len: usize) -> bool {
        self.frozen_prefix[offset + len] - self.frozen_prefix[offset] == len
    }

    fn node(&self, alpha: &[f64], len: usize, offset: usize, metrics: &mut Vec<f64>) -> (Vec<u8>, Vec<usize>) {
        let paths = metrics.len();
        debug_assert_eq!(alpha.len(), paths * len);

        if len == 1 {
            if self.all_frozen(offset, 1) {
                metrics.iter_mut().zip(alpha).for_each(|(pm, &a)| *pm += penalty(a, 0));
                return (vec![0; paths], (0..paths).collect());
            }
            return self.info_leaf(alpha, metrics);
        }

        let h = len / 2;
        let mut upper = Vec::with_capacity(paths * h);
        for a in alpha.chunks_exact(len) {
            let (x, y) = a.split_at(h);
            upper.extend(x.iter().zip(y).map(|(&p, &q)| box_plus(p, q)));
        }
        let (beta_u, parent_u) = self.node(&upper, h, offset, metrics);

        let mut lower = Vec::with_capacity(parent_u.len() * h);
        for (l, &src) in parent_u.iter().enumerate() {
            let a = &alpha[src * len..(src + 1) * len];
            let bits = &beta_u[l * h..(l + 1) * h];
            lower.extend((0..h).map(|i| if bits[i] == 0 { a[h + i] + a[i] } else { a[h + i] - a[i] }));
        }
        let (beta_l, parent_l) = self.node(&lower, h, offset + h, metrics);

        let mut beta = Vec::with_capacity(parent_l.len() * len);
        let mut parent = Vec::with_capacity(parent_l.len());
        for (l, &mid) in parent_l.iter().enumerate() {
            let bu = &beta_u[mid * h..(mid + 1) * h];
            let bl = &beta_l[l * h..(l + 1) * h];
            beta.extend(bu.iter().zip(bl).map(|(x, y)| x ^ y));
            beta.extend_from_slice(bl);
            parent.push(parent_u[mid]);
        }
        (beta, parent)
    }

    fn info_leaf(&self, alpha: &[f64], metrics: &mut Vec<f64>) -> (Vec<u8>, Vec<usize>) {
        let mut candidates: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * metrics.len());
        for (l, (&pm, &a)) in metrics.iter().zip(alpha).enumerate() {
            candidates.push((pm + penalty(a, 0), l, 0));
            candidates.push((pm + penalty(a, 1), l, 1));
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        candidates.truncate(self.list_size);
        metrics.clear();
        metrics.extend(candidates.iter().map(|c| c.0));
        (candidates.iter().map(|c| c.2).collect(), candidates.iter().map(|c| c.1).collect())
    }
}

/// Exact `2 atanh(tanh(a/2) tanh(b/2))` in the numerically stable
/// correction-term form.
fn box_plus(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    sign * m + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// `ln(1 + exp(-(1 - 2u) a))`, the metric increment of deciding `u`.
fn penalty(a: f64, u: u8) -> f64 {
    let x = if u == 0 { -a } else { a };
    // softplus(x), stable for large |x|.
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Decodes channel LLRs of the mother code; returns the candidate codewords
/// (not yet inverse-transformed) ordered from most to least likely.
pub(super) fn decode_list(channel: &[f64], frozen: &[bool], list_size: usize) -> Vec<Vec<u8>> {
    let n = channel.len();
    let mut frozen_prefix = Vec::with_capacity(n + 1);
    frozen_prefix.push(0);
    for &f in frozen {
        frozen_prefix.push(frozen_prefix.last().unwrap() + usize::from(f));
    }
    let tree = Tree { frozen_prefix, list_size };
    let mut metrics = vec![0.0];
    let (beta, _) = tree.node(channel, n, 0, &mut metrics);
    let mut order: Vec<usize> = (0..metrics.len()).collect();
    order.sort_by(|&a, &b| metrics[a].total_cmp(&metrics[b]).then(a.cmp(&b)));
    order.into_iter().map(|l| beta[l * n..(l + 1) * n].to_vec()).collect()
}
