//! Selection and variation operators, independent of contract execution.

use num_bigint::{BigInt, RandBigInt};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

/// Objective values, both maximized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Fitness {
    pub accuracy: f64,
    pub coverage: f64,
}

impl Fitness {
    pub fn new(accuracy: f64, coverage: f64) -> Fitness {
        Fitness { accuracy, coverage }
    }

    pub fn objectives(&self) -> [f64; 2] {
        [self.accuracy, self.coverage]
    }

    /// No worse in both objectives and strictly better in one.
    pub fn dominates(&self, other: &Fitness) -> bool {
        let (a, b) = (self.objectives(), other.objectives());
        a.iter().zip(&b).all(|(x, y)| x >= y) && a.iter().zip(&b).any(|(x, y)| x > y)
    }
}

/// Pareto fronts as index lists, best first; indices within a front ascend.
pub fn fast_nondominated_sort(fit: &[Fitness]) -> Vec<Vec<usize>> {
    let n = fit.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for p in 0..n {
        for q in 0..n {
            if fit[p].dominates(&fit[q]) {
                dominated_by_me[p].push(q);
            } else if fit[q].dominates(&fit[p]) {
                count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&p| count[p] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                count[q] -= 1;
                if count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (parallel to it).
pub fn crowding_distance(front: &[usize], fit: &[Fitness]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..2 {
        let obj = |i: usize| fit[front[i]].objectives()[m];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| obj(a).total_cmp(&obj(b)).then(a.cmp(&b)));
        let (lo, hi) = (obj(order[0]), obj(order[n - 1]));
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range == 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            dist[order[w]] += (obj(order[w + 1]) - obj(order[w - 1])) / range;
        }
    }
    dist
}

/// Rank (1-based) and crowding for every individual.
pub fn rank_and_crowd(fit: &[Fitness]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; fit.len()];
    let mut crowd = vec![0.0; fit.len()];
    for (r, front) in fast_nondominated_sort(fit).iter().enumerate() {
        for (i, d) in front.iter().zip(crowding_distance(front, fit)) {
            rank[*i] = r + 1;
            crowd[*i] = d;
        }
    }
    (rank, crowd)
}

/// Winner of a binary tournament between `a` and `b`.
pub fn tournament<R: Rng>(a: usize, b: usize, rank: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    if rank[a] != rank[b] {
        return if rank[a] < rank[b] { a } else { b };
    }
    if crowd[a] != crowd[b] {
        return if crowd[a] > crowd[b] { a } else { b };
    }
    if rng.gen_bool(0.5) {
        a
    } else {
        b
    }
}

/// `k` parents by binary tournament with replacement.
pub fn select_parents<R: Rng>(k: usize, rank: &[usize], crowd: &[f64], rng: &mut R) -> Vec<usize> {
    let n = rank.len();
    (0..k)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            tournament(a, b, rank, crowd, rng)
        })
        .collect()
}

/// Uniform crossover applied with probability `pc`.
pub fn crossover<R: Rng>(
    a: &[BigInt],
    b: &[BigInt],
    pc: f64,
    rng: &mut R,
) -> (Vec<BigInt>, Vec<BigInt>) {
    debug_assert_eq!(a.len(), b.len());
    if !rng.gen_bool(pc) {
        return (a.to_vec(), b.to_vec());
    }
    let mask: Vec<bool> = (0..a.len()).map(|_| rng.gen_bool(0.5)).collect();
    uniform_crossover(a, b, &mask)
}

/// Child one takes `a[i]` where `mask[i]`, child two the complement.
pub fn uniform_crossover(a: &[BigInt], b: &[BigInt], mask: &[bool]) -> (Vec<BigInt>, Vec<BigInt>) {
    let mut c1 = Vec::with_capacity(a.len());
    let mut c2 = Vec::with_capacity(a.len());
    for ((x, y), m) in a.iter().zip(b).zip(mask) {
        if *m {
            c1.push(x.clone());
            c2.push(y.clone());
        } else {
            c1.push(y.clone());
            c2.push(x.clone());
        }
    }
    (c1, c2)
}

/// Inclusive gene bounds.
pub type Bounds = (BigInt, BigInt);

pub fn truncate(v: BigInt, (lo, hi): &Bounds) -> BigInt {
    if &v < lo {
        lo.clone()
    } else if &v > hi {
        hi.clone()
    } else {
        v
    }
}

/// Largest mutation step for a gene: a sixteenth of its range, at least 1.
pub fn step(b: &Bounds) -> BigInt {
    let s: BigInt = (&b.1 - &b.0) / 16;
    if s.is_zero() {
        BigInt::one()
    } else {
        s
    }
}

/// Each gene with probability 1/M moves by a uniform delta within its step,
/// then is truncated to its bounds.
pub fn uniform_integer_mutation<R: Rng>(genes: &mut [BigInt], bounds: &[Bounds], rng: &mut R) {
    let p = 1.0 / genes.len() as f64;
    for (g, b) in genes.iter_mut().zip(bounds) {
        if !rng.gen_bool(p) {
            continue;
        }
        let s = step(b);
        let delta = rng.gen_bigint_range(&-&s, &(&s + 1));
        *g = truncate(&*g + delta, b);
    }
}

/// Shuffles `genes[p..=q]` and clamps every gene to its own bounds.
pub fn random_order_segment<R: Rng>(
    genes: &mut [BigInt],
    bounds: &[Bounds],
    p: usize,
    q: usize,
    rng: &mut R,
) {
    genes[p..=q].shuffle(rng);
    for (g, b) in genes.iter_mut().zip(bounds) {
        *g = truncate(std::mem::take(g), b);
    }
}

pub fn random_order_mutation<R: Rng>(genes: &mut [BigInt], bounds: &[Bounds], rng: &mut R) {
    if genes.len() < 2 {
        return;
    }
    let p = rng.gen_range(0..genes.len() - 1);
    let q = rng.gen_range(p + 1..genes.len());
    random_order_segment(genes, bounds, p, q, rng);
}

/// With probability `pm`, one of the two operators chosen by a fair coin.
pub fn mutate<R: Rng>(genes: &mut [BigInt], bounds: &[Bounds], pm: f64, rng: &mut R) {
    if genes.is_empty() || !rng.gen_bool(pm) {
        return;
    }
    if rng.gen_bool(0.5) {
        uniform_integer_mutation(genes, bounds, rng);
    } else {
        random_order_mutation(genes, bounds, rng);
    }
}

/// Uniform draw from inclusive bounds.
pub fn random_gene<R: Rng>(b: &Bounds, rng: &mut R) -> BigInt {
    rng.gen_bigint_range(&b.0, &(&b.1 + 1))
}

/// Indices of the `n` survivors: whole fronts in order, the last partial
/// front by descending crowding (ties by index).
pub fn environmental_selection(fit: &[Fitness], n: usize) -> Vec<usize> {
    let mut keep = Vec::with_capacity(n);
    for front in fast_nondominated_sort(fit) {
        if keep.len() + front.len() <= n {
            keep.extend(&front);
            continue;
        }
        let crowd = crowding_distance(&front, fit);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(front[a].cmp(&front[b])));
        keep.extend(order.into_iter().take(n - keep.len()).map(|i| front[i]));
        break;
    }
    keep
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn f(a: f64, c: f64) -> Fitness {
        Fitness::new(a, c)
    }

    #[test]
    fn sort_examples() {
        assert_eq!(
            fast_nondominated_sort(&[f(0.9, 0.9), f(0.9, 0.5), f(0.5, 0.5)]),
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(
            fast_nondominated_sort(&[f(0.3, 0.3); 4]),
            vec![vec![0, 1, 2, 3]]
        );
        assert_eq!(
            fast_nondominated_sort(&[f(1.0, 0.0), f(0.0, 1.0)]),
            vec![vec![0, 1]]
        );
    }

    #[test]
    fn crowding_examples() {
        let fit = [f(0.0, 1.0), f(0.5, 0.5), f(1.0, 0.0)];
        assert_eq!(
            crowding_distance(&[0, 1, 2], &fit),
            vec![f64::INFINITY, 2.0, f64::INFINITY]
        );
        assert_eq!(crowding_distance(&[0, 1], &fit), vec![f64::INFINITY; 2]);
        let same = [f(0.5, 0.5); 4];
        let d = crowding_distance(&[0, 1, 2, 3], &same);
        assert_eq!(d.iter().filter(|x| x.is_infinite()).count(), 2);
        assert_eq!(d.iter().filter(|x| **x == 0.0).count(), 2);
    }

    #[test]
    fn tournament_prefers_rank_then_crowding() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(tournament(0, 1, &[1, 2], &[0.0, 9.0], &mut rng), 0);
        assert_eq!(
            tournament(0, 1, &[1, 1], &[2.0, f64::INFINITY], &mut rng),
            1
        );
        let picks: Vec<usize> = (0..64)
            .map(|_| tournament(0, 1, &[1, 1], &[1.0, 1.0], &mut rng))
            .collect();
        assert!(picks.contains(&0) && picks.contains(&1));
    }

    #[test]
    fn selection_is_reproducible() {
        let rank = [1, 2, 1, 3, 2];
        let crowd = [1.0, 2.0, f64::INFINITY, 0.0, 0.5];
        let a = select_parents(20, &rank, &crowd, &mut ChaCha8Rng::seed_from_u64(9));
        let b = select_parents(20, &rank, &crowd, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
    }

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|x| BigInt::from(*x)).collect()
    }

    #[test]
    fn crossover_examples() {
        let a = big(&[1, 2, 3, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(crossover(&a, &a, 1.0, &mut rng), (a.clone(), a.clone()));
        let b = big(&[9, 8, 7, 6]);
        assert_eq!(
            uniform_crossover(&a, &b, &[true; 4]),
            (a.clone(), b.clone())
        );
        let (c1, c2) = crossover(&a, &b, 1.0, &mut rng);
        for i in 0..4 {
            assert!((c1[i] == a[i] && c2[i] == b[i]) || (c1[i] == b[i] && c2[i] == a[i]));
        }
        assert_eq!(crossover(&a, &b, 0.0, &mut rng), (a, b));
    }

    #[test]
    fn mutation_examples() {
        let u8b: Bounds = (BigInt::from(0), BigInt::from(255));
        assert_eq!(truncate(BigInt::from(250) + 10, &u8b), BigInt::from(255));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut g = big(&[1, 2]);
        mutate(&mut g, &[u8b.clone(), u8b.clone()], 0.0, &mut rng);
        assert_eq!(g, big(&[1, 2]));

        let wide: Bounds = (BigInt::from(0), BigInt::from(100));
        let orig = big(&[10, 20, 30, 40, 50]);
        for seed in 0..20 {
            let mut g = orig.clone();
            random_order_segment(
                &mut g,
                &vec![wide.clone(); 5],
                1,
                3,
                &mut ChaCha8Rng::seed_from_u64(seed),
            );
            assert_eq!((&g[0], &g[4]), (&orig[0], &orig[4]));
            let mut mid = g[1..=3].to_vec();
            mid.sort();
            assert_eq!(mid, orig[1..=3].to_vec());
        }
        let mut g = big(&[200, 3]);
        let narrow: Bounds = (BigInt::from(0), BigInt::from(7));
        random_order_segment(
            &mut g,
            &[u8b.clone(), narrow.clone()],
            0,
            1,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(g[1] <= BigInt::from(7));
    }

    #[test]
    fn bool_genes_can_move() {
        let b: Bounds = (BigInt::from(0), BigInt::from(1));
        assert_eq!(step(&b), BigInt::from(1));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..50 {
            let mut g = big(&[0]);
            uniform_integer_mutation(&mut g, std::slice::from_ref(&b), &mut rng);
            seen.insert(g[0].clone());
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn environmental_selection_keeps_front_one() {
        let fit = [
            f(0.1, 0.1),
            f(1.0, 0.0),
            f(0.0, 1.0),
            f(0.5, 0.5),
            f(0.2, 0.2),
            f(0.4, 0.4),
        ];
        let keep = environmental_selection(&fit, 3);
        assert_eq!(keep, vec![1, 2, 3]);
        assert_eq!(environmental_selection(&fit, 2).len(), 2);
    }
}
