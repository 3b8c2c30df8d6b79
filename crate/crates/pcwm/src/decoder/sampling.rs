//! Farthest-point sampling and neighbor grouping.
//!
//! Both kernels break ties by lexicographic coordinate comparison so their
//! output depends only on the point multiset, never on input order; the
//! decoder's exact permutation invariance rests on this.

use crate::error::{Error, Result};
use crate::geometry::{dist2, norm, Point};

/// True when `a` precedes `b` lexicographically by (x, y, z).
#[inline]
fn lex_less(a: Point, b: Point) -> bool {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
        .is_lt()
}

/// Greedy farthest-point sampling of `m` indices.
///
/// The start is the point of maximum norm (ties: lexicographically smallest
/// coordinates, then smallest index); each step selects the point farthest
/// from the selected set (distance ties: lexicographically smallest
/// candidate, then smallest index).
pub fn fps(points: &[Point], m: usize) -> Result<Vec<usize>> {
    if m > points.len() {
        return Err(Error::TooFewPoints {
            have: points.len(),
            need: m,
        });
    }
    if m == 0 {
        return Ok(Vec::new());
    }

    let start = (0..points.len())
        .max_by(|&a, &b| {
            norm(points[a]).total_cmp(&norm(points[b])).then_with(|| {
                // Inverted: a "wins" the max when its coordinates are
                // lexicographically smaller, then when its index is smaller.
                if lex_less(points[a], points[b]) {
                    std::cmp::Ordering::Greater
                } else if lex_less(points[b], points[a]) {
                    std::cmp::Ordering::Less
                } else {
                    b.cmp(&a)
                }
            })
        })
        .expect("non-empty point set");

    let mut selected = Vec::with_capacity(m);
    let mut min_dist2 = vec![f64::INFINITY; points.len()];
    let mut current = start;
    selected.push(start);
    while selected.len() < m {
        for (i, p) in points.iter().enumerate() {
            let d = dist2(*p, points[current]);
            if d < min_dist2[i] {
                min_dist2[i] = d;
            }
        }
        let next = (0..points.len())
            .max_by(|&a, &b| {
                min_dist2[a].total_cmp(&min_dist2[b]).then_with(|| {
                    if lex_less(points[a], points[b]) {
                        std::cmp::Ordering::Greater
                    } else if lex_less(points[b], points[a]) {
                        std::cmp::Ordering::Less
                    } else {
                        b.cmp(&a)
                    }
                })
            })
            .expect("non-empty point set");
        selected.push(next);
        current = next;
    }
    Ok(selected)
}

/// `k` nearest neighbors of each centroid position, closest first.
/// Distance ties break on lexicographic coordinates, then index; identical
/// points are interchangeable, so the grouped feature sets are
/// permutation-independent.
pub fn knn_group(points: &[Point], centroids: &[Point], k: usize) -> Result<Vec<Vec<usize>>> {
    if k > points.len() {
        return Err(Error::TooFewPoints {
            have: points.len(),
            need: k,
        });
    }
    let order = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.total_cmp(&b.0).then_with(|| {
            let (pa, pb) = (points[a.1], points[b.1]);
            if lex_less(pa, pb) {
                std::cmp::Ordering::Less
            } else if lex_less(pb, pa) {
                std::cmp::Ordering::Greater
            } else {
                a.1.cmp(&b.1)
            }
        })
    };
    let mut groups = Vec::with_capacity(centroids.len());
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    for &c in centroids {
        scratch.clear();
        scratch.extend(points.iter().enumerate().map(|(i, p)| (dist2(*p, c), i)));
        // Select the k closest, then order just that prefix; the comparator
        // is a total order so the selected set is input-order independent.
        if k < scratch.len() {
            scratch.select_nth_unstable_by(k - 1, order);
            scratch.truncate(k);
        }
        scratch.sort_by(order);
        groups.push(scratch.iter().map(|&(_, i)| i).collect());
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = SplitMix64::new(seed);
        (0..n)
            .map(|_| {
                [
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                ]
            })
            .collect()
    }

    #[test]
    fn fps_colinear_example() {
        let points = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert_eq!(fps(&points, 2).unwrap(), vec![2, 0]);
    }

    #[test]
    fn fps_m_equals_n_covers_everything() {
        let points = random_points(17, 4);
        let mut selected = fps(&points, 17).unwrap();
        selected.sort_unstable();
        assert_eq!(selected, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn fps_matches_greedy_oracle() {
        // Oracle recomputes min-distances from scratch each round.
        let points = random_points(64, 9);
        let m = 8;
        let got = fps(&points, m).unwrap();

        let start = (0..points.len())
            .max_by(|&a, &b| norm(points[a]).total_cmp(&norm(points[b])))
            .unwrap();
        let mut want = vec![start];
        while want.len() < m {
            let next = (0..points.len())
                .max_by(|&a, &b| {
                    let da = want
                        .iter()
                        .map(|&s| dist2(points[a], points[s]))
                        .fold(f64::INFINITY, f64::min);
                    let db = want
                        .iter()
                        .map(|&s| dist2(points[b], points[s]))
                        .fold(f64::INFINITY, f64::min);
                    da.total_cmp(&db)
                })
                .unwrap();
            want.push(next);
        }
        assert_eq!(got, want);
    }

    #[test]
    fn fps_too_few_points() {
        assert!(matches!(
            fps(&random_points(3, 1), 4),
            Err(Error::TooFewPoints { have: 3, need: 4 })
        ));
    }

    #[test]
    fn knn_self_and_full() {
        let points = random_points(20, 5);
        let groups = knn_group(&points, &[points[7]], 1).unwrap();
        assert_eq!(groups[0], vec![7]);

        let all = knn_group(&points, &[points[0]], 20).unwrap();
        let mut sorted = all[0].clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn knn_matches_sort_oracle() {
        let points = random_points(32, 6);
        let queries = random_points(5, 7);
        let groups = knn_group(&points, &queries, 6).unwrap();
        for (q, group) in queries.iter().zip(&groups) {
            let mut oracle: Vec<usize> = (0..points.len()).collect();
            oracle.sort_by(|&a, &b| dist2(points[a], *q).total_cmp(&dist2(points[b], *q)));
            assert_eq!(group, &oracle[..6]);
        }
    }
}
