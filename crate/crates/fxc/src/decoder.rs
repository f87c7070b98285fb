//! Belief propagation with ordered-statistics post-processing, and the
//! sliding-window wrapper that decodes a fault complex layer by layer.
//!
//! BP is min-sum with a flooding schedule; OSD re-solves the syndrome on the
//! most reliable information set when BP fails to converge. The window
//! decoder slices detector rows and fault columns by time layer, commits the
//! oldest `c` rounds of each window, and folds committed corrections into the
//! residual syndrome before sliding forward.

use crate::foliation::{FaultComplex, GradeLayout, LayerKind, Side};
use crate::gf2::{BinMatrix, BinVector};
use serde::{Deserialize, Serialize};

/// Log-likelihood ratios are clipped to this magnitude throughout.
pub const LLR_CLIP: f64 = 30.0;

#[derive(Debug, thiserror::Error)]
pub enum DecoderError {
    #[error("syndrome length {got} does not match detector rows {want}")]
    SyndromeLength { got: usize, want: usize },
    #[error("prior length {got} does not match fault count {want}")]
    PriorLength { got: usize, want: usize },
    #[error("syndrome is outside the image of the decoding matrix")]
    InconsistentSyndrome,
    #[error("window parameters invalid: w={w}, c={c} (need 1 <= c <= w)")]
    BadWindow { w: usize, c: usize },
}

/// OSD post-processing strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OsdStrategy {
    /// Zero all non-pivot bits (OSD-0).
    Osd0,
    /// OSD-0 plus a combination sweep over low-weight non-pivot patterns.
    CombinationSweep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeConfig {
    /// Min-sum iterations before falling back to OSD.
    pub bp_iters: usize,
    /// Scaling factor applied to min-sum check messages.
    pub min_sum_scale: f64,
    pub strategy: OsdStrategy,
    /// Number of leading non-pivot positions covered by the weight-2 sweep.
    pub osd_order: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            bp_iters: 30,
            min_sum_scale: 1.0,
            strategy: OsdStrategy::CombinationSweep,
            osd_order: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub correction: BinVector,
    /// BP converged on its own; OSD was not used.
    pub converged: bool,
    /// Iterations run before convergence (equals `bp_iters` if OSD ran).
    pub iterations: usize,
    /// Posterior LLRs at exit.
    pub posterior: Vec<f64>,
}

fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

/// Channel LLR of a flip probability, clipped.
pub fn prior_llr(p: f64) -> f64 {
    clip(((1.0 - p) / p).ln())
}

/// Sparse row/column adjacency of a decoding matrix.
struct Sparse {
    rows: usize,
    cols: usize,
    row_support: Vec<Vec<usize>>,
}

impl Sparse {
    fn new(h: &BinMatrix) -> Self {
        let mut row_support = vec![Vec::new(); h.rows()];
        for (i, j) in h.entries() {
            row_support[i].push(j);
        }
        Sparse {
            rows: h.rows(),
            cols: h.cols(),
            row_support,
        }
    }
}

/// Min-sum belief propagation with a flooding schedule. Returns the hard
/// decision, the posterior LLRs, and whether the syndrome was matched.
fn bp_min_sum(
    h: &Sparse,
    syndrome: &BinVector,
    priors_llr: &[f64],
    config: &DecodeConfig,
) -> (BinVector, Vec<f64>, bool, usize) {
    let mut posterior: Vec<f64> = priors_llr.to_vec();
    let hard = |post: &[f64]| {
        let mut v = BinVector::zeros(h.cols);
        for (j, &l) in post.iter().enumerate() {
            if l < 0.0 {
                v.set(j, true);
            }
        }
        v
    };
    let matches = |v: &BinVector| -> bool {
        (0..h.rows).all(|i| {
            let mut parity = false;
            for &j in &h.row_support[i] {
                parity ^= v.get(j);
            }
            parity == syndrome.get(i)
        })
    };
    let mut decision = hard(&posterior);
    if matches(&decision) {
        return (decision, posterior, true, 0);
    }
    // messages indexed by (check, position-in-row)
    let mut check_msg: Vec<Vec<f64>> = h
        .row_support
        .iter()
        .map(|sup| vec![0.0; sup.len()])
        .collect();
    for iter in 1..=config.bp_iters {
        // check update from current variable-to-check messages
        for i in 0..h.rows {
            let sup = &h.row_support[i];
            let incoming: Vec<f64> = sup
                .iter()
                .zip(check_msg[i].iter())
                .map(|(&j, &m)| clip(posterior[j] - m))
                .collect();
            let sign0 = if syndrome.get(i) { -1.0 } else { 1.0 };
            // min and second-min of |incoming|, product of signs
            let mut min1 = f64::INFINITY;
            let mut min2 = f64::INFINITY;
            let mut min1_at = 0;
            let mut sign_all = sign0;
            for (k, &m) in incoming.iter().enumerate() {
                if m < 0.0 {
                    sign_all = -sign_all;
                }
                let a = m.abs();
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    min1_at = k;
                } else if a < min2 {
                    min2 = a;
                }
            }
            for (k, m) in check_msg[i].iter_mut().enumerate() {
                let mag = if k == min1_at { min2 } else { min1 };
                let sign = if incoming[k] < 0.0 { -sign_all } else { sign_all };
                *m = clip(config.min_sum_scale * sign * mag);
            }
        }
        // variable update: posterior = prior + sum of check messages
        posterior.copy_from_slice(priors_llr);
        for i in 0..h.rows {
            for (k, &j) in h.row_support[i].iter().enumerate() {
                posterior[j] = clip(posterior[j] + check_msg[i][k]);
            }
        }
        decision = hard(&posterior);
        if matches(&decision) {
            return (decision, posterior, true, iter);
        }
    }
    (decision, posterior, false, config.bp_iters)
}

/// Ordered-statistics decoding on the posterior reliabilities. Pivots are
/// chosen from the columns most likely to be in error; non-pivot patterns of
/// weight up to two are swept when the strategy asks for it.
fn osd(
    h: &BinMatrix,
    syndrome: &BinVector,
    posterior: &[f64],
    config: &DecodeConfig,
) -> Result<BinVector, DecoderError> {
    let cols = h.cols();
    // most-likely-error first: ascending LLR, stable tie-break by index
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| {
        posterior[a]
            .partial_cmp(&posterior[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let permuted = h.select_columns(&order);
    // RREF of [permuted | syndrome]
    let mut aug = permuted.hstack_vec(syndrome);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row >= aug.rows() {
            break;
        }
        let mut pivot_row = None;
        for r in row..aug.rows() {
            if aug.get(r, col) {
                pivot_row = Some(r);
                break;
            }
        }
        let Some(p) = pivot_row else { continue };
        aug.swap_rows(row, p);
        for r in 0..aug.rows() {
            if r != row && aug.get(r, col) {
                aug.row_xor(r, row);
            }
        }
        pivots.push(col);
        row += 1;
    }
    // consistency: any all-zero row must have zero syndrome bit
    for r in row..aug.rows() {
        if aug.get(r, cols) {
            return Err(DecoderError::InconsistentSyndrome);
        }
    }
    let non_pivots: Vec<usize> = {
        let mut mask = vec![false; cols];
        for &p in &pivots {
            mask[p] = true;
        }
        (0..cols).filter(|&c| !mask[c]).collect()
    };
    // base solution (OSD-0): pivot values read off the syndrome column
    let pivot_value_base: Vec<bool> = (0..pivots.len()).map(|r| aug.get(r, cols)).collect();
    // effect of setting one non-pivot bit: the reduced column restricted to pivot rows
    let np_effect: Vec<Vec<bool>> = non_pivots
        .iter()
        .map(|&c| (0..pivots.len()).map(|r| aug.get(r, c)).collect())
        .collect();
    let soft_cost = |pivot_vals: &[bool], np_set: &[usize]| -> f64 {
        let mut cost = 0.0;
        for (r, &v) in pivot_vals.iter().enumerate() {
            if v {
                cost += posterior[order[pivots[r]]];
            }
        }
        for &k in np_set {
            cost += posterior[order[non_pivots[k]]];
        }
        cost
    };
    let mut best_pivot_vals = pivot_value_base.clone();
    let mut best_np: Vec<usize> = Vec::new();
    let mut best_cost = soft_cost(&best_pivot_vals, &[]);
    if config.strategy == OsdStrategy::CombinationSweep {
        let consider = |np_set: &[usize],
                            best_cost: &mut f64,
                            best_pivot_vals: &mut Vec<bool>,
                            best_np: &mut Vec<usize>| {
            let mut vals = pivot_value_base.clone();
            for &k in np_set {
                for (r, v) in vals.iter_mut().enumerate() {
                    *v ^= np_effect[k][r];
                }
            }
            let cost = soft_cost(&vals, np_set);
            if cost < *best_cost {
                *best_cost = cost;
                *best_pivot_vals = vals;
                *best_np = np_set.to_vec();
            }
        };
        for k in 0..non_pivots.len() {
            consider(&[k], &mut best_cost, &mut best_pivot_vals, &mut best_np);
        }
        let sweep = non_pivots.len().min(config.osd_order);
        for a in 0..sweep {
            for b in (a + 1)..sweep {
                consider(&[a, b], &mut best_cost, &mut best_pivot_vals, &mut best_np);
            }
        }
    }
    let mut correction = BinVector::zeros(cols);
    for (r, &v) in best_pivot_vals.iter().enumerate() {
        if v {
            correction.set(order[pivots[r]], true);
        }
    }
    for &k in &best_np {
        correction.set(order[non_pivots[k]], true);
    }
    Ok(correction)
}

/// Decodes one syndrome against a full decoding matrix: BP first, OSD on
/// non-convergence.
pub fn decode(
    h: &BinMatrix,
    syndrome: &BinVector,
    priors: &[f64],
    config: &DecodeConfig,
) -> Result<DecodeOutcome, DecoderError> {
    if syndrome.len() != h.rows() {
        return Err(DecoderError::SyndromeLength {
            got: syndrome.len(),
            want: h.rows(),
        });
    }
    if priors.len() != h.cols() {
        return Err(DecoderError::PriorLength {
            got: priors.len(),
            want: h.cols(),
        });
    }
    let sparse = Sparse::new(h);
    decode_with_sparse(h, &sparse, syndrome, priors, config)
}

/// `decode` against a matrix whose sparse adjacency was built in advance.
fn decode_with_sparse(
    h: &BinMatrix,
    sparse: &Sparse,
    syndrome: &BinVector,
    priors: &[f64],
    config: &DecodeConfig,
) -> Result<DecodeOutcome, DecoderError> {
    let priors_llr: Vec<f64> = priors.iter().map(|&p| prior_llr(p)).collect();
    let (decision, posterior, converged, iterations) =
        bp_min_sum(sparse, syndrome, &priors_llr, config);
    if converged {
        return Ok(DecodeOutcome {
            correction: decision,
            converged: true,
            iterations,
            posterior,
        });
    }
    let correction = osd(h, syndrome, &posterior, config)?;
    Ok(DecodeOutcome {
        correction,
        converged: false,
        iterations,
        posterior,
    })
}

/// Sliding-window parameters: decode `w` rounds at a time, commit the oldest
/// `c` of them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub w: usize,
    pub c: usize,
}

#[derive(Debug, Clone)]
pub struct WindowOutcome {
    pub correction: BinVector,
    /// Number of windows decoded.
    pub windows: usize,
    /// True when every window's BP converged without OSD.
    pub all_converged: bool,
}

/// Row/column slice of one decoding window.
struct WindowSlice {
    rows: Vec<usize>,
    cols: Vec<usize>,
    commit_cols: Vec<usize>,
    matrix: BinMatrix,
}

/// One window of a precomputed plan: the slice plus the resolved commit
/// column set (the final window commits everything it sees).
struct PlannedWindow {
    rows: Vec<usize>,
    cols: Vec<usize>,
    /// Indices into `cols` to commit after decoding.
    commit: Vec<usize>,
    matrix: BinMatrix,
    sparse: Sparse,
}

/// Precomputed window structure for one decoding problem. The slicing and
/// commit schedule depend only on the detector layout, the window
/// parameters, and the cleared columns — not on the syndrome — so a plan is
/// built once and reused across trials.
pub struct WindowPlan {
    windows: Vec<PlannedWindow>,
    /// Support of each committed fault column, for residual updates.
    col_support: Vec<Vec<usize>>,
    n_rows: usize,
    n_cols: usize,
}

fn layer_in_window(layer: usize, start: usize, extent: usize, layers: usize, periodic: bool) -> bool {
    if periodic {
        if extent >= layers {
            return true;
        }
        let rel = (layer + layers - start % layers) % layers;
        rel < extent
    } else {
        layer >= start && layer < (start + extent).min(layers)
    }
}

#[allow(clippy::too_many_arguments)]
fn slice_window(
    h: &BinMatrix,
    side: Side,
    row_layout: &GradeLayout,
    col_layout: &GradeLayout,
    start: usize,
    w_rounds: usize,
    c_rounds: usize,
    periodic: bool,
    committed: &[bool],
    cleared_cols: &[bool],
) -> WindowSlice {
    // detector rows: check layers [t, t+w), bit layers [t, t+w]
    let mut row_in = vec![false; row_layout.total()];
    for idx in 0..row_layout.total() {
        let (kind, layer, _) = row_layout.decompose(idx);
        let extent = match kind {
            LayerKind::Check => w_rounds,
            LayerKind::Bit => w_rounds + 1,
        };
        if layer_in_window(layer, start, extent, row_layout.layers(kind), periodic) {
            row_in[idx] = true;
        }
    }
    // fault columns: all uncommitted columns supported on the selected rows
    let mut col_in = vec![false; col_layout.total()];
    for (i, j) in h.entries() {
        if row_in[i] && !committed[j] && !cleared_cols[j] {
            col_in[j] = true;
        }
    }
    let cols: Vec<usize> = (0..col_layout.total()).filter(|&j| col_in[j]).collect();
    // drop rows with no live columns
    let mut row_live = vec![false; row_layout.total()];
    for (i, j) in h.entries() {
        if row_in[i] && col_in[j] {
            row_live[i] = true;
        }
    }
    let rows: Vec<usize> = (0..row_layout.total()).filter(|&i| row_live[i]).collect();
    // Commit columns: check layers [t, t+c) on both sides. Bit layers are
    // committed inclusively [t, t+c] on the primal side (the boundary
    // measurement layer is fixed by the retired stabilizer rows) but
    // exclusively [t, t+c) on the dual side, where bit-layer columns are the
    // data columns the next window's detectors still need.
    let commit_cols: Vec<usize> = cols
        .iter()
        .copied()
        .filter(|&j| {
            let (kind, layer, _) = col_layout.decompose(j);
            let extent = match (kind, side) {
                (LayerKind::Check, _) => c_rounds,
                (LayerKind::Bit, Side::Primal) => c_rounds + 1,
                (LayerKind::Bit, Side::Dual) => c_rounds,
            };
            layer_in_window(layer, start, extent, col_layout.layers(kind), periodic)
        })
        .collect();
    let matrix = h.submatrix(&rows, &cols);
    WindowSlice {
        rows,
        cols,
        commit_cols,
        matrix,
    }
}

/// Builds the window plan for one side of a fault complex. The commit
/// schedule evolves independently of the measured syndrome, so the slices,
/// submatrices, and sparse adjacencies can all be prepared once and reused
/// for every trial of an experiment.
pub fn plan_windows(
    fault: &FaultComplex,
    side: Side,
    window: &WindowConfig,
    periodic: bool,
    cleared_cols: &[bool],
) -> Result<WindowPlan, DecoderError> {
    if window.c == 0 || window.c > window.w {
        return Err(DecoderError::BadWindow {
            w: window.w,
            c: window.c,
        });
    }
    let h = fault.detector(side);
    let row_layout = fault.detector_layout(side);
    let col_layout = fault.fault_layout(side);
    let total_rounds = col_layout.check_layers.max(1);
    let mut committed = vec![false; h.cols()];
    for (j, &cleared) in cleared_cols.iter().enumerate() {
        if cleared {
            committed[j] = true;
        }
    }
    let mut windows = Vec::new();
    let mut start = 0;
    loop {
        // the final window covers and commits every remaining round
        let last = start + window.w >= total_rounds
            || (periodic && start + window.c >= total_rounds);
        let (w_rounds, c_rounds) = if last {
            (total_rounds, total_rounds)
        } else {
            (window.w, window.c)
        };
        let slice = slice_window(
            h,
            side,
            &row_layout,
            &col_layout,
            start,
            w_rounds,
            c_rounds,
            periodic,
            &committed,
            cleared_cols,
        );
        if slice.cols.is_empty() {
            if last {
                break;
            }
            start += window.c;
            continue;
        }
        // indices into the slice's column list to commit after decoding
        let commit: Vec<usize> = if last {
            (0..slice.cols.len()).collect()
        } else {
            let commit_set: std::collections::HashSet<usize> =
                slice.commit_cols.iter().copied().collect();
            slice
                .cols
                .iter()
                .enumerate()
                .filter(|(_, j)| commit_set.contains(j))
                .map(|(k, _)| k)
                .collect()
        };
        for &k in &commit {
            committed[slice.cols[k]] = true;
        }
        let sparse = Sparse::new(&slice.matrix);
        windows.push(PlannedWindow {
            rows: slice.rows,
            cols: slice.cols,
            commit,
            matrix: slice.matrix,
            sparse,
        });
        if last {
            break;
        }
        start += window.c;
    }
    let mut col_support = vec![Vec::new(); h.cols()];
    for (i, j) in h.entries() {
        col_support[j].push(i);
    }
    Ok(WindowPlan {
        windows,
        col_support,
        n_rows: h.rows(),
        n_cols: h.cols(),
    })
}

impl WindowPlan {
    pub fn window_count(&self) -> usize {
        self.windows.len()
    }

    /// Detector rows (global indices) of window `k`.
    pub fn window_rows(&self, k: usize) -> &[usize] {
        &self.windows[k].rows
    }

    /// Fault columns (global indices) of window `k`.
    pub fn window_cols(&self, k: usize) -> &[usize] {
        &self.windows[k].cols
    }

    /// Decoding matrix of window `k`.
    pub fn window_matrix(&self, k: usize) -> &BinMatrix {
        &self.windows[k].matrix
    }

    /// Runs the planned windows over one syndrome.
    pub fn decode(
        &self,
        syndrome: &BinVector,
        priors: &[f64],
        config: &DecodeConfig,
    ) -> Result<WindowOutcome, DecoderError> {
        if syndrome.len() != self.n_rows {
            return Err(DecoderError::SyndromeLength {
                got: syndrome.len(),
                want: self.n_rows,
            });
        }
        if priors.len() != self.n_cols {
            return Err(DecoderError::PriorLength {
                got: priors.len(),
                want: self.n_cols,
            });
        }
        let mut residual = syndrome.clone();
        let mut correction = BinVector::zeros(self.n_cols);
        let mut all_converged = true;
        for win in &self.windows {
            let sub_syndrome = residual.select(&win.rows);
            let sub_priors: Vec<f64> = win.cols.iter().map(|&j| priors[j]).collect();
            let outcome =
                decode_with_sparse(&win.matrix, &win.sparse, &sub_syndrome, &sub_priors, config)?;
            all_converged &= outcome.converged;
            // commit: apply correction on commit columns, fold into the residual
            for &k in &win.commit {
                if outcome.correction.get(k) {
                    let j = win.cols[k];
                    correction.flip(j);
                    for &i in &self.col_support[j] {
                        residual.flip(i);
                    }
                }
            }
        }
        Ok(WindowOutcome {
            correction,
            windows: self.windows.len(),
            all_converged,
        })
    }
}

/// Decodes a full syndrome of one side of a fault complex with a sliding
/// window. `periodic` selects wrap-around time (cyclic repetition factor);
/// `cleared_cols[j]` marks fault columns excluded by boundary clearing.
pub fn window_decode(
    fault: &FaultComplex,
    side: Side,
    syndrome: &BinVector,
    priors: &[f64],
    window: &WindowConfig,
    periodic: bool,
    cleared_cols: &[bool],
    config: &DecodeConfig,
) -> Result<WindowOutcome, DecoderError> {
    let plan = plan_windows(fault, side, window, periodic, cleared_cols)?;
    plan.decode(syndrome, priors, config)
}
