//! JSON form of plans.
//!
//! ```json
//! {"N": 2, "d": 1, "blocks": [
//!   {"kind": "product", "scale": 1.0, "symmetrized": true,
//!    "factors": [{"kind": "atoms", "atoms": [{"x": [0.0], "b": 1.0}]},
//!                {"kind": "cloud", "points": [[1.0]], "weights": [1.0]}]},
//!   {"kind": "map", "symmetrized": true, "tuples": [{"x": [[0.0], [1.0]], "w": 0.5}]}
//! ]}
//! ```

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Block, Factor, MapBlock, Plan, PlanError, ProductBlock, Tuple};
use crate::measure::{Atom, AtomList, Cloud, MeasureError, Point};

#[derive(Debug, thiserror::Error)]
pub enum PlanDocError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("atom weight {0} is not positive")]
    BadAtomWeight(f64),
    #[error("map tuple weight {0} is not positive")]
    BadTupleWeight(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FactorDoc {
    Atoms { atoms: Vec<Atom> },
    Cloud { points: Vec<Point>, weights: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BlockDoc {
    Product {
        scale: f64,
        symmetrized: bool,
        factors: Vec<FactorDoc>,
    },
    Map {
        symmetrized: bool,
        tuples: Vec<Tuple>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    #[serde(rename = "N")]
    n: usize,
    d: usize,
    blocks: Vec<BlockDoc>,
}

impl From<&Factor> for FactorDoc {
    fn from(f: &Factor) -> Self {
        match f {
            Factor::Atomic(a) => FactorDoc::Atoms {
                atoms: a.entries().to_vec(),
            },
            Factor::Diffuse(c) => FactorDoc::Cloud {
                points: c.iter().map(|s| s.x.clone()).collect(),
                weights: c.iter().map(|s| s.w).collect(),
            },
        }
    }
}

impl TryFrom<FactorDoc> for Factor {
    type Error = PlanDocError;

    fn try_from(doc: FactorDoc) -> Result<Self, Self::Error> {
        match doc {
            FactorDoc::Atoms { atoms } => {
                if let Some(a) = atoms.iter().find(|a| !(a.b > 0.0 && a.b.is_finite())) {
                    return Err(PlanDocError::BadAtomWeight(a.b));
                }
                Ok(Factor::Atomic(AtomList::from_entries_unchecked(atoms)))
            }
            FactorDoc::Cloud { points, weights } => Ok(Factor::Diffuse(Cloud::from_points(points, weights)?)),
        }
    }
}

fn to_doc(p: &Plan) -> PlanDoc {
    PlanDoc {
        n: p.n,
        d: p.d,
        blocks: p
            .blocks
            .iter()
            .map(|b| match b {
                Block::Product(pb) => BlockDoc::Product {
                    scale: pb.scale,
                    symmetrized: pb.symmetrized,
                    factors: pb.factors.iter().map(FactorDoc::from).collect(),
                },
                Block::Map(mb) => BlockDoc::Map {
                    symmetrized: mb.symmetrized,
                    tuples: mb.tuples.clone(),
                },
            })
            .collect(),
    }
}

fn from_doc(doc: PlanDoc) -> Result<Plan, PlanDocError> {
    let mut blocks = Vec::with_capacity(doc.blocks.len());
    for b in doc.blocks {
        blocks.push(match b {
            BlockDoc::Product {
                scale,
                symmetrized,
                factors,
            } => Block::Product(ProductBlock {
                factors: factors.into_iter().map(Factor::try_from).collect::<Result<_, _>>()?,
                scale,
                symmetrized,
            }),
            BlockDoc::Map { symmetrized, tuples } => {
                if let Some(t) = tuples.iter().find(|t| !(t.w > 0.0 && t.w.is_finite())) {
                    return Err(PlanDocError::BadTupleWeight(t.w));
                }
                Block::Map(MapBlock { tuples, symmetrized })
            }
        });
    }
    Ok(Plan::from_blocks(doc.n, doc.d, blocks)?)
}

impl Serialize for Plan {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        to_doc(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Plan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        from_doc(PlanDoc::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}
