use rand::Rng;

/// Probability that a given gene takes part in crossover.
const GENE_CROSSOVER_PROB: f64 = 0.5;

/// Simulated binary crossover over genes in `[0, 1]`.
///
/// With probability `1 − prob` the children are copies of the parents.
/// Otherwise each gene is crossed with probability 1/2 using a spread factor
/// from the `eta`-indexed polynomial law; children keep the parents' mean
/// and are clipped to `[0, 1]`.
pub fn sbx_crossover<R: Rng + ?Sized>(
    parent_a: &[f64],
    parent_b: &[f64],
    eta: f64,
    prob: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut a = parent_a.to_vec();
    let mut b = parent_b.to_vec();
    if rng.random::<f64>() >= prob {
        return (a, b);
    }
    let exponent = 1.0 / (eta + 1.0);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        if rng.random::<f64>() >= GENE_CROSSOVER_PROB || (*x - *y).abs() < 1e-14 {
            continue;
        }
        let u: f64 = rng.random();
        let beta = if u <= 0.5 { (2.0 * u).powf(exponent) } else { (1.0 / (2.0 * (1.0 - u))).powf(exponent) };
        let (p, q) = (*x, *y);
        let mut c1 = 0.5 * ((1.0 + beta) * p + (1.0 - beta) * q);
        let mut c2 = 0.5 * ((1.0 - beta) * p + (1.0 + beta) * q);
        if rng.random::<bool>() {
            std::mem::swap(&mut c1, &mut c2);
        }
        *x = c1.clamp(0.0, 1.0);
        *y = c2.clamp(0.0, 1.0);
    }
    (a, b)
}

/// Bounded polynomial mutation on `[0, 1]`, applied to each gene with
/// probability `prob`.
pub fn polynomial_mutation<R: Rng + ?Sized>(genome: &mut [f64], eta: f64, prob: f64, rng: &mut R) {
    let exponent = 1.0 / (eta + 1.0);
    for x in genome.iter_mut() {
        if rng.random::<f64>() >= prob {
            continue;
        }
        let y = *x;
        let u: f64 = rng.random();
        let dq = if u < 0.5 {
            let xy = 1.0 - y;
            let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
            val.powf(exponent) - 1.0
        } else {
            let xy = y;
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
            1.0 - val.powf(exponent)
        };
        *x = (y + dq).clamp(0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_parents_give_identical_children() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = vec![0.3, 0.9, 0.0, 1.0];
        for _ in 0..100 {
            let (a, b) = sbx_crossover(&p, &p, 20.0, 1.0, &mut rng);
            assert_eq!(a, p);
            assert_eq!(b, p);
        }
    }

    #[test]
    fn no_crossover_copies_parents() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = sbx_crossover(&[0.1, 0.2], &[0.8, 0.7], 20.0, 0.0, &mut rng);
        assert_eq!((a, b), (vec![0.1, 0.2], vec![0.8, 0.7]));
    }

    #[test]
    fn children_preserve_parent_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (pa, pb) = (vec![0.4, 0.45], vec![0.6, 0.5]);
        let mut sum = [0.0; 2];
        let n = 10_000;
        for _ in 0..n {
            let (a, b) = sbx_crossover(&pa, &pb, 20.0, 1.0, &mut rng);
            for g in 0..2 {
                assert!((0.0..=1.0).contains(&a[g]) && (0.0..=1.0).contains(&b[g]));
                sum[g] += 0.5 * (a[g] + b[g]);
            }
        }
        for g in 0..2 {
            let expected = 0.5 * (pa[g] + pb[g]);
            assert!((sum[g] / n as f64 - expected).abs() < 0.01);
        }
    }

    #[test]
    fn boundary_parents_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let (a, b) = sbx_crossover(&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.001], 2.0, 1.0, &mut rng);
            assert!(a.iter().chain(&b).all(|g| (0.0..=1.0).contains(g)));
        }
    }

    #[test]
    fn zero_mutation_probability_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = vec![0.1, 0.5, 0.9];
        polynomial_mutation(&mut g, 20.0, 0.0, &mut rng);
        assert_eq!(g, vec![0.1, 0.5, 0.9]);
    }

    #[test]
    fn mutation_is_bounded_and_symmetric_at_centre() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            let mut edge = [if i % 2 == 0 { 0.0 } else { 1.0 }];
            polynomial_mutation(&mut edge, 20.0, 1.0, &mut rng);
            assert!((0.0..=1.0).contains(&edge[0]));
            let mut g = [0.5];
            polynomial_mutation(&mut g, 20.0, 1.0, &mut rng);
            assert!((0.0..=1.0).contains(&g[0]));
            d.push(g[0] - 0.5);
        }
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let skew = d.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n as f64 / var.powf(1.5);
        assert!(skew.abs() < 0.05, "skewness {skew}");
    }
}
