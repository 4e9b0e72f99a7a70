//! Non-atomic marginals: a cyclic cell shift.
//!
//! The cloud is cut into `2N` cells of equal mass along a direction and each
//! point of cell `j` is sent to the point of the same quantile in cell
//! `j + 2 (mod 2N)`. The tuple `(x, φ(x), …, φ^{N−1}(x))` then visits cells
//! that are pairwise non-adjacent, so its slots stay a full cell apart.

use crate::measure::{Cloud, Sample};
use crate::partition::{choose_direction, split_exact_along, SplitConfig};
use crate::plan::{block_separation, Block, MapBlock, Plan, Tuple};

use super::ConstructError;

/// Symmetric plan with marginal `c` and no two slots at the same location.
pub fn plan_diffuse(c: &Cloud, n: usize, split: &SplitConfig) -> Result<Plan, ConstructError> {
    let Some(first) = c.samples().first() else {
        return Err(ConstructError::EmptyCloud);
    };
    let d = first.x.dim();
    if n == 1 {
        let tuples = c
            .iter()
            .map(|s| Tuple {
                x: vec![s.x.clone()],
                w: s.w,
            })
            .collect();
        return Ok(Plan::from_blocks(
            1,
            d,
            vec![Block::Map(MapBlock {
                tuples,
                symmetrized: true,
            })],
        )?);
    }
    let dir = choose_direction(c, split)?;
    let cells_n = 2 * n;
    let cell_mass = c.total_mass() / cells_n as f64;
    let cells: Vec<Vec<Sample>> = split_exact_along(c, &vec![cell_mass; cells_n], &dir)?
        .into_iter()
        .map(Cloud::into_samples)
        .collect();

    let tuples = shift_coupling(&cells, n, cell_mass);
    let block = Block::Map(MapBlock {
        tuples,
        symmetrized: true,
    });
    let separation = block_separation(&block);
    if separation <= 0.0 {
        return Err(ConstructError::DegenerateCloud);
    }
    Ok(Plan::from_blocks(n, d, vec![block])?)
}

/// Couples the `2N` cells by quantile: walking all cells in parallel, each
/// stretch of common cumulative mass `Δ` yields `2N` tuples of weight `Δ`,
/// the one starting in cell `j` visiting cells `j, j + 2, …, j + 2(N − 1)`.
fn shift_coupling(cells: &[Vec<Sample>], n: usize, cell_mass: f64) -> Vec<Tuple> {
    let m = cells.len();
    let tiny = 1e-15 * cell_mass;
    let mut idx = vec![0usize; m];
    let mut left: Vec<f64> = cells.iter().map(|c| c.first().map_or(0.0, |s| s.w)).collect();
    let mut tuples = Vec::new();
    while idx.iter().zip(cells).all(|(&i, c)| i < c.len()) {
        let delta = left.iter().copied().fold(f64::INFINITY, f64::min);
        if delta > 0.0 {
            for j in 0..m {
                tuples.push(Tuple {
                    x: (0..n).map(|s| cells[(j + 2 * s) % m][idx[(j + 2 * s) % m]].x.clone()).collect(),
                    w: delta,
                });
            }
        }
        for j in 0..m {
            left[j] -= delta;
            if left[j] <= tiny {
                idx[j] += 1;
                left[j] = cells[j].get(idx[j]).map_or(0.0, |s| s.w);
            }
        }
    }
    tuples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Point;
    use crate::plan::{marginal, min_separation};

    fn eight() -> Cloud {
        Cloud::new(
            (1..=8)
                .map(|i| Sample {
                    x: Point::new(vec![(2 * i - 1) as f64 / 16.0]),
                    w: 0.125,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn eight_samples_two_slots() {
        let plan = plan_diffuse(&eight(), 2, &SplitConfig::default()).unwrap();
        let Block::Map(mb) = &plan.blocks()[0] else { panic!() };
        assert_eq!(mb.tuples.len(), 8);
        for t in &mb.tuples {
            assert!((t.x[0].distance(&t.x[1]) - 0.5).abs() < 1e-15);
            assert_eq!(t.w, 0.125);
        }
        assert_eq!(min_separation(&plan), 0.5);
        let m = marginal(&plan).unwrap();
        for s in m.cloud.iter() {
            assert!((s.w - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn single_slot_keeps_the_cloud() {
        let plan = plan_diffuse(&eight(), 1, &SplitConfig::default()).unwrap();
        assert_eq!(plan.n(), 1);
        assert_eq!(marginal(&plan).unwrap().cloud, eight().canonicalized());
    }

    #[test]
    fn repeated_point_is_degenerate() {
        let c = Cloud::new(vec![Sample { x: Point::new(vec![0.5]), w: 0.1 }; 10]).unwrap();
        assert!(matches!(
            plan_diffuse(&c, 2, &SplitConfig::default()),
            Err(ConstructError::Partition(crate::partition::PartitionError::DegenerateCloud { .. }))
        ));
    }

    #[test]
    fn unequal_weights_in_the_plane() {
        let base = crate::measure::uniform_box(&[0.0, 0.0], &[1.0, 1.0], 1.0, 101, 9);
        let c = Cloud::new(
            base.iter()
                .enumerate()
                .map(|(i, s)| Sample {
                    x: s.x.clone(),
                    w: (1 + i % 3) as f64,
                })
                .collect(),
        )
        .unwrap();
        let plan = plan_diffuse(&c, 3, &SplitConfig::default()).unwrap();
        let m = marginal(&plan).unwrap();
        let want = c.canonicalized();
        assert_eq!(m.cloud.len(), want.len());
        for (a, b) in m.cloud.iter().zip(want.iter()) {
            assert_eq!(a.x, b.x);
            assert!((a.w - b.w).abs() < 1e-12);
        }
        assert!(min_separation(&plan) > 0.0);
    }
}
