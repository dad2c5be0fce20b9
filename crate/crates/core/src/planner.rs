//! Analytic sizing of fully sharded data-parallel units.
//!
//! Collectives are modeled as rings under an α–β cost model: each of the
//! `p − 1` hops pays a fixed latency `alpha` plus `m / B` to move one shard
//! of `m` bytes. Grouping `g` transformer blocks into one unit multiplies
//! the message size by `g` and divides the number of collectives by `g`,
//! at the price of holding `g` unsharded blocks in memory.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("invalid model shape: {0}")]
    InvalidShape(String),
    #[error("invalid collective model: {0}")]
    InvalidModel(String),
    #[error("ring collectives need at least 2 ranks, got {ranks}")]
    InvalidRanks { ranks: u64 },
    #[error("memory cap of {cap} bytes is below one unsharded block ({block_bytes} bytes)")]
    InfeasibleCap { cap: u64, block_bytes: u64 },
}

/// Dimensions of one transformer block and the number of blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelShape {
    pub hidden: u64,
    pub ffn_hidden: u64,
    pub query_heads: u64,
    pub kv_heads: u64,
    pub head_dim: u64,
    pub layers: u64,
    pub dtype_bytes: u64,
}

impl ModelShape {
    /// LLaMA-3-8B block dimensions in bf16.
    pub const LLAMA3_8B: ModelShape = ModelShape {
        hidden: 4096,
        ffn_hidden: 14336,
        query_heads: 32,
        kv_heads: 8,
        head_dim: 128,
        layers: 32,
        dtype_bytes: 2,
    };

    pub fn validate(&self) -> Result<(), PlannerError> {
        let fields = [
            ("hidden", self.hidden),
            ("ffn_hidden", self.ffn_hidden),
            ("query_heads", self.query_heads),
            ("kv_heads", self.kv_heads),
            ("head_dim", self.head_dim),
            ("layers", self.layers),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(PlannerError::InvalidShape(format!(
                "{name} must be positive"
            )));
        }
        if self.kv_heads > self.query_heads {
            return Err(PlannerError::InvalidShape(format!(
                "kv_heads ({}) exceeds query_heads ({})",
                self.kv_heads, self.query_heads
            )));
        }
        if ![1, 2, 4].contains(&self.dtype_bytes) {
            return Err(PlannerError::InvalidShape(format!(
                "dtype_bytes must be 1, 2 or 4, got {}",
                self.dtype_bytes
            )));
        }
        Ok(())
    }

    /// Unsharded bytes of one block.
    pub fn block_bytes(&self) -> u64 {
        block_param_count(self) * self.dtype_bytes
    }
}

/// Parameters of one block: attention projections, gated MLP and two norms.
pub fn block_param_count(shape: &ModelShape) -> u64 {
    let h = shape.hidden;
    let q = shape.query_heads * shape.head_dim;
    let kv = shape.kv_heads * shape.head_dim;
    h * q + 2 * h * kv + q * h + 3 * h * shape.ffn_hidden + 2 * h
}

/// Bytes each of `dp` ranks holds for `params` parameters.
pub fn fsdp_shard_bytes(params: u64, dtype_bytes: u64, dp: u64) -> u64 {
    params.div_ceil(dp) * dtype_bytes
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollectiveModel {
    /// Seconds per ring hop.
    pub alpha: f64,
    /// Link bandwidth in bytes per second.
    pub bandwidth: f64,
}

impl CollectiveModel {
    pub fn new(alpha: f64, bandwidth: f64) -> Result<Self, PlannerError> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(PlannerError::InvalidModel(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(PlannerError::InvalidModel(format!(
                "bandwidth must be finite and > 0, got {bandwidth}"
            )));
        }
        Ok(CollectiveModel { alpha, bandwidth })
    }
}

/// Ring all-gather of one `shard_bytes` shard per rank.
pub fn ring_allgather_time(
    model: &CollectiveModel,
    shard_bytes: u64,
    ranks: u64,
) -> Result<f64, PlannerError> {
    if ranks < 2 {
        return Err(PlannerError::InvalidRanks { ranks });
    }
    Ok((ranks - 1) as f64 * (model.alpha + shard_bytes as f64 / model.bandwidth))
}

/// Same schedule as the all-gather, run in reverse.
pub fn ring_reduce_scatter_time(
    model: &CollectiveModel,
    shard_bytes: u64,
    ranks: u64,
) -> Result<f64, PlannerError> {
    ring_allgather_time(model, shard_bytes, ranks)
}

/// Bus bandwidth of a collective moving `total_bytes` in `seconds`.
pub fn bus_bandwidth(total_bytes: f64, seconds: f64, ranks: u64) -> f64 {
    total_bytes / seconds * (ranks - 1) as f64 / ranks as f64
}

/// Modeled numbers for one `(dp, blocks_per_unit)` choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FsdpPlan {
    pub dp: u64,
    pub blocks_per_unit: u64,
    pub units: u64,
    pub shard_bytes: u64,
    pub unit_bytes: u64,
    pub busbw_bytes_per_sec: f64,
    /// Fraction of one collective spent in hop latency.
    pub latency_share: f64,
    pub step_comm_seconds: f64,
}

/// Evaluate grouping `g` blocks per unit: two all-gathers and one
/// reduce-scatter per unit per step.
pub fn evaluate_unit_size(
    shape: &ModelShape,
    dp: u64,
    model: &CollectiveModel,
    blocks_per_unit: u64,
) -> Result<FsdpPlan, PlannerError> {
    shape.validate()?;
    if blocks_per_unit == 0 {
        return Err(PlannerError::InvalidShape(
            "blocks_per_unit must be positive".to_string(),
        ));
    }
    let params = blocks_per_unit * block_param_count(shape);
    let shard_bytes = fsdp_shard_bytes(params, shape.dtype_bytes, dp.max(1));
    let t = ring_allgather_time(model, shard_bytes, dp)?;
    let units = shape.layers.div_ceil(blocks_per_unit);
    let step = units as f64 * (2.0 * t + ring_reduce_scatter_time(model, shard_bytes, dp)?);
    Ok(FsdpPlan {
        dp,
        blocks_per_unit,
        units,
        shard_bytes,
        unit_bytes: params * shape.dtype_bytes,
        busbw_bytes_per_sec: bus_bandwidth(dp as f64 * shard_bytes as f64, t, dp),
        latency_share: (dp - 1) as f64 * model.alpha / t,
        step_comm_seconds: step,
    })
}

/// Relative slack under which two step times count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Fastest grouping whose unsharded unit fits in `memory_cap_bytes`;
/// ties go to fewer blocks per unit.
pub fn plan_unit_size(
    shape: &ModelShape,
    dp: u64,
    model: &CollectiveModel,
    memory_cap_bytes: u64,
) -> Result<FsdpPlan, PlannerError> {
    shape.validate()?;
    let block_bytes = shape.block_bytes();
    if memory_cap_bytes < block_bytes {
        return Err(PlannerError::InfeasibleCap {
            cap: memory_cap_bytes,
            block_bytes,
        });
    }
    let max_g = shape.layers.min(memory_cap_bytes / block_bytes);
    let mut best = evaluate_unit_size(shape, dp, model, 1)?;
    for g in 2..=max_g {
        let plan = evaluate_unit_size(shape, dp, model, g)?;
        if plan.step_comm_seconds < best.step_comm_seconds * (1.0 - TIE_TOLERANCE) {
            best = plan;
        }
    }
    Ok(best)
}

pub const TABLE_CSV_HEADER: &str =
    "dp,blocks_per_unit,shard_bytes,busbw_bytes_per_sec,latency_share,step_comm_seconds";

/// One row per `(dp, g)` pair, dp-major.
pub fn message_size_table(
    shape: &ModelShape,
    model: &CollectiveModel,
    dp_degrees: &[u64],
    blocks_per_unit: &[u64],
) -> Result<Vec<FsdpPlan>, PlannerError> {
    let mut rows = Vec::with_capacity(dp_degrees.len() * blocks_per_unit.len());
    for &dp in dp_degrees {
        for &g in blocks_per_unit {
            rows.push(evaluate_unit_size(shape, dp, model, g)?);
        }
    }
    Ok(rows)
}

/// Floats use shortest round-trip formatting.
pub fn table_csv(rows: &[FsdpPlan]) -> String {
    let mut s = String::from(TABLE_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:?},{:?},{:?}\n",
            r.dp,
            r.blocks_per_unit,
            r.shard_bytes,
            r.busbw_bytes_per_sec,
            r.latency_share,
            r.step_comm_seconds
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_shape() -> ModelShape {
        ModelShape {
            hidden: 1,
            ffn_hidden: 1,
            query_heads: 1,
            kv_heads: 1,
            head_dim: 1,
            layers: 1,
            dtype_bytes: 1,
        }
    }

    #[test]
    fn block_params() {
        assert_eq!(block_param_count(&unit_shape()), 9);
        assert_eq!(block_param_count(&ModelShape::LLAMA3_8B), 218_112_000);
        let wider = ModelShape {
            ffn_hidden: 2 * 14336,
            ..ModelShape::LLAMA3_8B
        };
        assert_eq!(
            block_param_count(&wider) - block_param_count(&ModelShape::LLAMA3_8B),
            3 * 4096 * 14336
        );
    }

    #[test]
    fn shard_sizes() {
        assert_eq!(fsdp_shard_bytes(1024, 2, 1024), 2);
        assert_eq!(fsdp_shard_bytes(218_112_000, 2, 1024), 426_000);
        assert_eq!(fsdp_shard_bytes(218_112_000, 2, 1), 436_224_000);
    }

    #[test]
    fn ring_times() {
        let m = CollectiveModel::new(0.0, 1.0).unwrap();
        assert_eq!(ring_allgather_time(&m, 1, 2).unwrap(), 1.0);
        let m = CollectiveModel::new(1e-5, 1e10).unwrap();
        assert_eq!(ring_allgather_time(&m, 0, 9).unwrap(), 8.0 * 1e-5);
        let t = ring_allgather_time(&m, 426_000, 1024).unwrap();
        assert!((t - 0.0538098).abs() < 1e-9);
        assert_eq!(
            ring_allgather_time(&m, 1, 1),
            Err(PlannerError::InvalidRanks { ranks: 1 })
        );
        assert!(CollectiveModel::new(-1.0, 1.0).is_err());
        assert!(CollectiveModel::new(0.0, 0.0).is_err());
    }

    #[test]
    fn busbw_equals_link_for_two_ranks_without_latency() {
        let m = CollectiveModel::new(0.0, 3e9).unwrap();
        let t = ring_allgather_time(&m, 1 << 20, 2).unwrap();
        assert!((bus_bandwidth(2.0 * (1 << 20) as f64, t, 2) - 3e9).abs() < 1e-3);
    }

    #[test]
    fn plan_limits() {
        let s = ModelShape::LLAMA3_8B;
        let free = CollectiveModel::new(0.0, 1e10).unwrap();
        assert_eq!(
            plan_unit_size(&s, 1024, &free, u64::MAX)
                .unwrap()
                .blocks_per_unit,
            1
        );
        let slow = CollectiveModel::new(1.0, 1e12).unwrap();
        let plan = plan_unit_size(&s, 1024, &slow, u64::MAX).unwrap();
        assert_eq!(plan.blocks_per_unit, 32);
        assert_eq!(plan.unit_bytes, 32 * s.block_bytes());
        let capped = plan_unit_size(&s, 1024, &slow, 5 * s.block_bytes() + 1).unwrap();
        assert_eq!(capped.blocks_per_unit, 5);
        assert_eq!(
            plan_unit_size(&s, 1024, &slow, 10),
            Err(PlannerError::InfeasibleCap {
                cap: 10,
                block_bytes: s.block_bytes()
            })
        );
    }

    #[test]
    fn table_rows_and_csv() {
        let m = CollectiveModel::new(1e-5, 1e10).unwrap();
        let rows = message_size_table(&ModelShape::LLAMA3_8B, &m, &[8, 1024], &[1, 2]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(
            (rows[2].dp, rows[2].blocks_per_unit, rows[2].shard_bytes),
            (1024, 1, 426_000)
        );
        let csv = table_csv(&rows);
        assert_eq!(csv.lines().next().unwrap(), TABLE_CSV_HEADER);
        assert!(csv.lines().nth(3).unwrap().starts_with("1024,1,426000,"));
    }

    fn shapes() -> impl Strategy<Value = ModelShape> {
        (
            1u64..512,
            1u64..2048,
            1u64..32,
            1u64..32,
            1u64..128,
            1u64..48,
            prop::sample::select(vec![1u64, 2, 4]),
        )
            .prop_map(|(h, f, nq, nkv, d, layers, w)| ModelShape {
                hidden: h,
                ffn_hidden: f,
                query_heads: nq.max(nkv),
                kv_heads: nkv.min(nq),
                head_dim: d,
                layers,
                dtype_bytes: w,
            })
    }

    proptest! {
        #[test]
        fn params_match_matrix_enumeration(s in shapes()) {
            let (h, q, kv) = (s.hidden, s.query_heads * s.head_dim, s.kv_heads * s.head_dim);
            let matrices = [(h, q), (h, kv), (h, kv), (q, h), (h, s.ffn_hidden), (h, s.ffn_hidden), (s.ffn_hidden, h)];
            let vectors = [h, h];
            let total: u64 = matrices.iter().map(|(a, b)| a * b).sum::<u64>() + vectors.iter().sum::<u64>();
            prop_assert_eq!(block_param_count(&s), total);
        }

        #[test]
        fn shard_ceiling_subadditive(p in 1u64..1_000_000, g in 1u64..64, w in 1u64..5, dp in 1u64..4096) {
            let grouped = fsdp_shard_bytes(g * p, w, dp);
            prop_assert!(grouped <= g * fsdp_shard_bytes(p, w, dp));
            if p % dp == 0 {
                prop_assert_eq!(grouped, g * fsdp_shard_bytes(p, w, dp));
            }
        }

        #[test]
        fn grouping_everything_amortizes_latency(s in shapes(), alpha in 1e-7f64..1e-2, dp in 2u64..2048) {
            let m = CollectiveModel::new(alpha, 1e10).unwrap();
            let one = evaluate_unit_size(&s, dp, &m, 1).unwrap();
            let all = evaluate_unit_size(&s, dp, &m, s.layers).unwrap();
            prop_assert!(all.step_comm_seconds <= one.step_comm_seconds * (1.0 + 1e-12));
        }
    }
}
