//! Hinged triplet loss, its gradient through the shared encoder, and online
//! semi-hard triplet mining over a batch of embeddings.

use super::mlp::{EmbeddingModel, Gradients, ModelError};

pub fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64, ModelError> {
    if a.len() != b.len() {
        return Err(ModelError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `max(0, ||f_a - f_p||^2 - ||f_a - f_n||^2 + alpha)`.
pub fn triplet_loss(
    f_anchor: &[f64],
    f_positive: &[f64],
    f_negative: &[f64],
    alpha: f64,
) -> Result<f64, ModelError> {
    let d_ap = squared_distance(f_anchor, f_positive)?;
    let d_an = squared_distance(f_anchor, f_negative)?;
    Ok((d_ap - d_an + alpha).max(0.0))
}

/// Loss and parameter gradients for one descriptor triplet. Gradients are
/// all zero when the hinge is inactive.
pub fn triplet_loss_grad(
    model: &EmbeddingModel,
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    alpha: f64,
) -> Result<(f64, Gradients), ModelError> {
    let trace_a = model.forward_trace(anchor)?;
    let trace_p = model.forward_trace(positive)?;
    let trace_n = model.forward_trace(negative)?;
    let mut grads = model.zero_grads();
    let loss = accumulate_triplet_grad(model, &trace_a, &trace_p, &trace_n, alpha, &mut grads)?;
    Ok((loss, grads))
}

/// Shared backward pass over already-computed traces; used by the training
/// loop so each batch item is embedded once however many triplets touch it.
pub(crate) fn accumulate_triplet_grad(
    model: &EmbeddingModel,
    trace_a: &super::mlp::ForwardTrace,
    trace_p: &super::mlp::ForwardTrace,
    trace_n: &super::mlp::ForwardTrace,
    alpha: f64,
    grads: &mut Gradients,
) -> Result<f64, ModelError> {
    let f_a = &trace_a.output;
    let f_p = &trace_p.output;
    let f_n = &trace_n.output;
    let loss = triplet_loss(f_a, f_p, f_n, alpha)?;
    if loss <= 0.0 {
        return Ok(0.0);
    }
    let d_anchor: Vec<f64> = f_n.iter().zip(f_p).map(|(n, p)| 2.0 * (n - p)).collect();
    let d_positive: Vec<f64> = f_p.iter().zip(f_a).map(|(p, a)| 2.0 * (p - a)).collect();
    let d_negative: Vec<f64> = f_a.iter().zip(f_n).map(|(a, n)| 2.0 * (a - n)).collect();
    model.backward(trace_a, &d_anchor, grads);
    model.backward(trace_p, &d_positive, grads);
    model.backward(trace_n, &d_negative, grads);
    Ok(loss)
}

/// Online mining over one batch. For every ordered anchor-positive pair the
/// preferred negative is the hardest semi-hard one: the smallest
/// `d(a, n)` inside the open margin band `(d(a, p), d(a, p) + alpha)`. When
/// the band is empty the pair falls back to the hardest violating negative
/// (`d(a, n) <= d(a, p)`), which keeps early training moving when nothing is
/// semi-hard yet. Pairs whose negatives all sit beyond the margin carry zero
/// loss and are skipped. Distances are squared Euclidean.
pub fn mine_semi_hard(
    embeddings: &[Vec<f64>],
    labels: &[u32],
    alpha: f64,
) -> Vec<(usize, usize, usize)> {
    assert_eq!(embeddings.len(), labels.len());
    let n = embeddings.len();
    let mut triplets = Vec::new();
    for a in 0..n {
        for p in 0..n {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            let d_ap = match squared_distance(&embeddings[a], &embeddings[p]) {
                Ok(d) => d,
                Err(_) => continue,
            };
            let mut semi_hard: Option<(f64, usize)> = None;
            let mut violating: Option<(f64, usize)> = None;
            for (neg, emb_n) in embeddings.iter().enumerate() {
                if labels[neg] == labels[a] {
                    continue;
                }
                let d_an = match squared_distance(&embeddings[a], emb_n) {
                    Ok(d) => d,
                    Err(_) => continue,
                };
                if d_an > d_ap && d_an < d_ap + alpha {
                    if semi_hard.is_none_or(|(best, _)| d_an < best) {
                        semi_hard = Some((d_an, neg));
                    }
                } else if d_an <= d_ap && violating.is_none_or(|(best, _)| d_an < best) {
                    violating = Some((d_an, neg));
                }
            }
            if let Some((_, neg)) = semi_hard.or(violating) {
                triplets.push((a, p, neg));
            }
        }
    }
    triplets
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_embeddings_cost_alpha() {
        let f = vec![0.5, -0.5];
        assert_eq!(triplet_loss(&f, &f, &f, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn hinge_boundary_is_zero() {
        // d_ap = 0, d_an = alpha.
        let f_a = vec![0.0, 0.0];
        let f_n = vec![1.0, 0.0];
        assert_eq!(triplet_loss(&f_a, &f_a, &f_n, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn scalar_arithmetic_cases() {
        let f_a = vec![0.0, 0.0];
        let f_p = vec![1.0, 0.0];
        let f_n = vec![0.0, 2.0];
        // max(0, 1 - 4 + 1) = 0
        assert_eq!(triplet_loss(&f_a, &f_p, &f_n, 1.0).unwrap(), 0.0);
        // max(0, 1 - 4 + 4) = 1
        assert_eq!(triplet_loss(&f_a, &f_p, &f_n, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn loss_is_never_negative() {
        let f_a = vec![0.0];
        let f_p = vec![0.1];
        let f_n = vec![10.0];
        assert_eq!(triplet_loss(&f_a, &f_p, &f_n, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn inactive_triplet_has_zero_gradients() {
        let model = super::super::mlp::EmbeddingModel::seeded(&[3, 2], false, 1.0, 4).unwrap();
        // Same anchor/positive, negative far away: hinge inactive for small alpha.
        let anchor = [0.1, 0.2, 0.3];
        let negative = [5.0, -5.0, 5.0];
        let (loss, grads) =
            triplet_loss_grad(&model, &anchor, &anchor, &negative, 1.0).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    /// Brute-force mining oracle: enumerate every (a, p, n) and apply the
    /// selection rule directly.
    fn mine_oracle(embeddings: &[Vec<f64>], labels: &[u32], alpha: f64) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for a in 0..embeddings.len() {
            for p in 0..embeddings.len() {
                if a == p || labels[a] != labels[p] {
                    continue;
                }
                let d_ap = squared_distance(&embeddings[a], &embeddings[p]).unwrap();
                let mut band: Vec<(f64, usize)> = Vec::new();
                let mut viol: Vec<(f64, usize)> = Vec::new();
                for n in 0..embeddings.len() {
                    if labels[n] == labels[a] {
                        continue;
                    }
                    let d_an = squared_distance(&embeddings[a], &embeddings[n]).unwrap();
                    if d_an > d_ap && d_an < d_ap + alpha {
                        band.push((d_an, n));
                    } else if d_an <= d_ap {
                        viol.push((d_an, n));
                    }
                }
                band.sort_by(|x, y| x.partial_cmp(y).unwrap());
                viol.sort_by(|x, y| x.partial_cmp(y).unwrap());
                if let Some(&(_, n)) = band.first().or(viol.first()) {
                    out.push((a, p, n));
                }
            }
        }
        out
    }

    #[test]
    fn three_point_batch_pairs_both_orderings() {
        let embeddings = vec![vec![0.0], vec![0.1], vec![0.5]];
        let labels = vec![0, 0, 1];
        let got = mine_semi_hard(&embeddings, &labels, 1.0);
        assert_eq!(got, vec![(0, 1, 2), (1, 0, 2)]);
        assert_eq!(got, mine_oracle(&embeddings, &labels, 1.0));
    }

    #[test]
    fn all_easy_negatives_mine_nothing() {
        // d_an = 9 >= d_ap + alpha for every pair.
        let embeddings = vec![vec![0.0], vec![0.1], vec![3.0]];
        let labels = vec![0, 0, 1];
        assert!(mine_semi_hard(&embeddings, &labels, 1.0).is_empty());
    }

    #[test]
    fn single_label_mines_nothing() {
        let embeddings = vec![vec![0.0], vec![1.0], vec![2.0]];
        let labels = vec![3, 3, 3];
        assert!(mine_semi_hard(&embeddings, &labels, 1.0).is_empty());
    }

    #[test]
    fn violating_fallback_keeps_pairs_alive() {
        // Negative closer than the positive: no semi-hard, but the violating
        // fallback still returns a triplet with positive loss.
        let embeddings = vec![vec![0.0], vec![1.0], vec![0.2]];
        let labels = vec![0, 0, 1];
        let got = mine_semi_hard(&embeddings, &labels, 1.0);
        assert!(got.contains(&(0, 1, 2)));
        for &(a, p, n) in &got {
            let l = triplet_loss(&embeddings[a], &embeddings[p], &embeddings[n], 1.0).unwrap();
            assert!(l > 0.0);
        }
        assert_eq!(got, mine_oracle(&embeddings, &labels, 1.0));
    }

    #[test]
    fn mining_matches_oracle_on_seeded_batches() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(31);
        for _ in 0..25 {
            let n = rng.random_range(4..12);
            let embeddings: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let got = mine_semi_hard(&embeddings, &labels, 1.0);
            let want = mine_oracle(&embeddings, &labels, 1.0);
            assert_eq!(got, want);
            for &(a, p, neg) in &got {
                assert_eq!(labels[a], labels[p]);
                assert_ne!(labels[a], labels[neg]);
                let l = triplet_loss(&embeddings[a], &embeddings[p], &embeddings[neg], 1.0)
                    .unwrap();
                assert!(l > 0.0, "mined triplet must carry loss");
            }
        }
    }
}
