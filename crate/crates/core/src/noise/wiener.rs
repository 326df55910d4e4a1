use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::iterated::IteratedIntegrals;
use super::levy::{pair_count, pair_index, sample_levy_areas, LevyTerms};
use crate::error::{Error, Result};
use crate::model::NoiseClass;
use crate::rng::{path_stream, PathRng, StreamTag};

/// Fine-grid increments and bridge samples are rounded to multiples of this
/// dyadic quantum, so sums of stored increments are exact in `f64` and the
/// increment over a union of pieces does not depend on how it is split.
pub const INCREMENT_QUANTUM: f64 = 1.0 / 17_592_186_044_416.0; // 2^-44
const INV_QUANTUM: f64 = 17_592_186_044_416.0;

/// Relative tolerance (in units of the grid spacing) for treating a time as
/// a grid point.
const ALIGN_TOL: f64 = 1e-9;

fn quantize(x: f64) -> f64 {
    libm::round(x * INV_QUANTUM) * INCREMENT_QUANTUM
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WienerMode {
    /// Fresh independent draws for every query.
    OnDemand,
    /// One stored Brownian path on a fine grid; off-grid points are filled in
    /// by Brownian bridges and cached.
    FineGridCoupled,
}

/// An `m`-dimensional Brownian motion on `[0, T]`.
#[derive(Debug)]
pub struct WienerSource {
    drivers: usize,
    horizon: f64,
    inner: Inner,
}

#[derive(Debug)]
enum Inner {
    OnDemand(OnDemand),
    FineGrid(FineGrid),
}

#[derive(Debug)]
struct OnDemand {
    wiener: PathRng,
    areas: PathRng,
}

/// Split points inside one fine cell.
#[derive(Debug, Clone, Default)]
struct CellDetail {
    /// Sorted interior times.
    points: Vec<f64>,
    /// `W(point) - W(cell start)`, `points.len() x m`.
    offsets: Vec<f64>,
    /// Lévy areas per piece, `(points.len() + 1) x pairs`.
    areas: Vec<f64>,
}

#[derive(Debug)]
struct FineGrid {
    h_ref: f64,
    cells: usize,
    /// Cell increments, `cells x m`.
    dw: Vec<f64>,
    /// Lévy area of every undivided cell, `cells x pairs` (empty without areas).
    cell_areas: Vec<f64>,
    detailed: Vec<bool>,
    detail: BTreeMap<usize, CellDetail>,
    /// Series length for fine-level Lévy areas; `None` disables areas.
    levy_terms: Option<usize>,
    areas_ready: bool,
    bridge: PathRng,
    areas: PathRng,
}

/// A node of the fine partition: the start of `cell` (`piece == 0`) or its
/// `piece`-th interior split point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Node {
    cell: usize,
    piece: usize,
}

impl WienerSource {
    pub fn on_demand(drivers: usize, horizon: f64, wiener: PathRng, areas: PathRng) -> Self {
        WienerSource {
            drivers,
            horizon,
            inner: Inner::OnDemand(OnDemand { wiener, areas }),
        }
    }

    /// On-demand source on the streams of `(master_seed, path_index)`.
    pub fn on_demand_for_path(
        drivers: usize,
        horizon: f64,
        master_seed: u64,
        path_index: u64,
    ) -> Self {
        Self::on_demand(
            drivers,
            horizon,
            path_stream(master_seed, path_index, StreamTag::Wiener),
            path_stream(master_seed, path_index, StreamTag::LevyArea),
        )
    }

    /// Fine-grid source with spacing `h_ref`. The cell increments are drawn
    /// in time order from `wiener`; every point of `registered` (jump times,
    /// typically) is then inserted by a Brownian bridge. With `levy` set,
    /// Lévy areas of every piece of that partition are drawn last.
    #[allow(clippy::too_many_arguments)]
    pub fn fine_grid(
        drivers: usize,
        horizon: f64,
        h_ref: f64,
        registered: &[f64],
        levy: Option<LevyTerms>,
        mut wiener: PathRng,
        bridge: PathRng,
        areas: PathRng,
    ) -> Result<Self> {
        if drivers == 0 {
            return Err(Error::param("drivers", "must be positive"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive and finite"));
        }
        if !(h_ref > 0.0 && h_ref <= horizon) {
            return Err(Error::param("h_ref", "must lie in (0, T]"));
        }
        let cells_f = libm::round(horizon / h_ref);
        if libm::fabs(cells_f * h_ref - horizon) > ALIGN_TOL * horizon {
            return Err(Error::param("h_ref", "must divide the horizon"));
        }
        let cells = cells_f as usize;
        let sqrt_h = libm::sqrt(h_ref);
        let dw = (0..cells * drivers)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut wiener);
                quantize(sqrt_h * z)
            })
            .collect();
        let levy_terms = if drivers >= 2 {
            levy.map(|l| l.resolve(h_ref))
        } else {
            None
        };
        let mut grid = FineGrid {
            h_ref,
            cells,
            dw,
            cell_areas: Vec::new(),
            detailed: vec![false; cells],
            detail: BTreeMap::new(),
            levy_terms,
            areas_ready: false,
            bridge,
            areas,
        };
        let mut sorted = registered.to_vec();
        sorted.sort_by(f64::total_cmp);
        for &u in &sorted {
            if !(u >= 0.0 && u <= horizon) {
                return Err(Error::param("registered", "points must lie in [0, T]"));
            }
            grid.locate(u, drivers)?;
        }
        grid.fill_areas(drivers);
        Ok(WienerSource {
            drivers,
            horizon,
            inner: Inner::FineGrid(grid),
        })
    }

    /// Fine-grid source on the streams of `(master_seed, path_index)`.
    pub fn fine_grid_for_path(
        drivers: usize,
        horizon: f64,
        h_ref: f64,
        registered: &[f64],
        levy: Option<LevyTerms>,
        master_seed: u64,
        path_index: u64,
    ) -> Result<Self> {
        Self::fine_grid(
            drivers,
            horizon,
            h_ref,
            registered,
            levy,
            path_stream(master_seed, path_index, StreamTag::Wiener),
            path_stream(master_seed, path_index, StreamTag::Bridge),
            path_stream(master_seed, path_index, StreamTag::LevyArea),
        )
    }

    pub fn mode(&self) -> WienerMode {
        match self.inner {
            Inner::OnDemand(_) => WienerMode::OnDemand,
            Inner::FineGrid(_) => WienerMode::FineGridCoupled,
        }
    }

    pub fn drivers(&self) -> usize {
        self.drivers
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Fine-grid spacing, if coupled.
    pub fn h_ref(&self) -> Option<f64> {
        match &self.inner {
            Inner::FineGrid(g) => Some(g.h_ref),
            Inner::OnDemand(_) => None,
        }
    }

    /// Stored increment of fine cell `k` (coupled mode only).
    pub fn cell_increment(&self, k: usize) -> Option<&[f64]> {
        match &self.inner {
            Inner::FineGrid(g) if k < g.cells => {
                Some(&g.dw[k * self.drivers..(k + 1) * self.drivers])
            }
            _ => None,
        }
    }

    fn check_interval(&self, s: f64, t: f64) -> Result<()> {
        let slack = ALIGN_TOL * self.horizon;
        if !(s >= -slack && t > s && t <= self.horizon + slack) {
            return Err(Error::InvalidInterval { start: s, end: t });
        }
        Ok(())
    }

    /// `W(t) - W(s)`.
    pub fn increment(&mut self, s: f64, t: f64) -> Result<Vec<f64>> {
        self.check_interval(s, t)?;
        let m = self.drivers;
        match &mut self.inner {
            Inner::OnDemand(od) => {
                let scale = libm::sqrt(t - s);
                Ok((0..m)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut od.wiener);
                        scale * z
                    })
                    .collect())
            }
            Inner::FineGrid(g) => {
                let a = g.locate(s, m)?;
                let b = g.locate(t, m)?;
                if a >= b {
                    return Err(Error::InvalidInterval { start: s, end: t });
                }
                let mut sum = vec![0.0; m];
                g.for_each_piece(a, b, m, |_, dw, _| {
                    for (acc, v) in sum.iter_mut().zip(dw) {
                        *acc += v;
                    }
                });
                Ok(sum)
            }
        }
    }

    /// `W(u) - W(cell_start)` for a point inside one fine cell, sampled
    /// from the Brownian bridge pinned to the stored cell increment (and to
    /// any split points already present) and cached for later queries.
    pub fn bridge_increment(&mut self, cell_start: f64, cell_end: f64, u: f64) -> Result<Vec<f64>> {
        let m = self.drivers;
        let g = match &mut self.inner {
            Inner::FineGrid(g) => g,
            Inner::OnDemand(_) => return Err(Error::Unsupported("bridge_increment")),
        };
        let outside = Error::OutsideCell {
            start: cell_start,
            end: cell_end,
            point: u,
        };
        let k = match g.grid_index(cell_start) {
            Some(k) if k < g.cells => k,
            _ => return Err(outside),
        };
        if g.grid_index(cell_end) != Some(k + 1) {
            return Err(outside);
        }
        if !(u > cell_start && u < cell_end) {
            return Err(outside);
        }
        let node = g.locate(u, m)?;
        if node.cell != k || node.piece == 0 {
            // `u` is within the alignment tolerance of a grid point.
            return Err(outside);
        }
        let d = &g.detail[&k];
        Ok(d.offsets[(node.piece - 1) * m..node.piece * m].to_vec())
    }

    /// Increments and iterated integrals over `[s, t]`.
    ///
    /// Off-diagonal integrals carry a Lévy area only for non-commutative
    /// noise with at least two drivers; otherwise they are split
    /// symmetrically. In coupled mode the areas are assembled from the
    /// fine-grid pieces (`levy` is ignored; the fine-level series length is
    /// fixed when the source is built).
    pub fn sample_iterated(
        &mut self,
        s: f64,
        t: f64,
        class: NoiseClass,
        levy: LevyTerms,
    ) -> Result<IteratedIntegrals> {
        self.check_interval(s, t)?;
        let m = self.drivers;
        let h = t - s;
        let needs_area = class.needs_levy_area(m);
        match &mut self.inner {
            Inner::OnDemand(od) => {
                let scale = libm::sqrt(h);
                let dw: Vec<f64> = (0..m)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut od.wiener);
                        scale * z
                    })
                    .collect();
                if needs_area {
                    let areas = sample_levy_areas(&mut od.areas, h, &dw, levy.resolve(h));
                    Ok(IteratedIntegrals::with_areas(h, dw, &areas))
                } else {
                    Ok(IteratedIntegrals::symmetric(h, dw))
                }
            }
            Inner::FineGrid(g) => {
                if needs_area && g.levy_terms.is_none() {
                    return Err(Error::param(
                        "levy",
                        "coupled source was built without Lévy areas for non-commutative noise",
                    ));
                }
                let a = g.locate(s, m)?;
                let b = g.locate(t, m)?;
                if a >= b {
                    return Err(Error::InvalidInterval { start: s, end: t });
                }
                let mut acc = vec![0.0; m];
                if !needs_area {
                    g.for_each_piece(a, b, m, |_, dw, _| {
                        for (x, v) in acc.iter_mut().zip(dw) {
                            *x += v;
                        }
                    });
                    return Ok(IteratedIntegrals::symmetric(h, acc));
                }
                // Ito product rule over consecutive pieces:
                // I_{j,i}[s,t] = sum_k ( I^k_{j,i} + (W_j(t_k) - W_j(s)) dW^k_i ).
                let mut off = vec![0.0; m * m];
                g.for_each_piece(a, b, m, |_, dw, area| {
                    for j in 0..m {
                        for i in 0..m {
                            if i == j {
                                continue;
                            }
                            let piece_area = if j < i {
                                area[pair_index(m, j, i)]
                            } else {
                                -area[pair_index(m, i, j)]
                            };
                            off[j * m + i] += acc[j] * dw[i] + dw[j] * dw[i] / 2.0 + piece_area;
                        }
                    }
                    for (x, v) in acc.iter_mut().zip(dw) {
                        *x += v;
                    }
                });
                let mut areas = vec![0.0; pair_count(m)];
                for j in 0..m {
                    for i in j + 1..m {
                        areas[pair_index(m, j, i)] = (off[j * m + i] - off[i * m + j]) / 2.0;
                    }
                }
                Ok(IteratedIntegrals::with_areas(h, acc, &areas))
            }
        }
    }
}

impl FineGrid {
    fn pairs(&self, m: usize) -> usize {
        if self.levy_terms.is_some() {
            pair_count(m)
        } else {
            0
        }
    }

    fn grid_index(&self, t: f64) -> Option<usize> {
        let x = t / self.h_ref;
        let k = libm::round(x);
        if k >= 0.0 && k <= self.cells as f64 && libm::fabs(x - k) <= ALIGN_TOL {
            Some(k as usize)
        } else {
            None
        }
    }

    fn cell_start(&self, cell: usize) -> f64 {
        cell as f64 * self.h_ref
    }

    /// Finds (or creates) the partition node at time `t`.
    fn locate(&mut self, t: f64, m: usize) -> Result<Node> {
        if let Some(k) = self.grid_index(t) {
            return Ok(Node { cell: k, piece: 0 });
        }
        let cell = libm::floor(t / self.h_ref);
        if !(cell >= 0.0 && (cell as usize) < self.cells) {
            return Err(Error::InvalidInterval { start: 0.0, end: t });
        }
        let cell = cell as usize;
        if self.detailed[cell] {
            let d = &self.detail[&cell];
            if let Ok(p) = d.points.binary_search_by(|p| p.total_cmp(&t)) {
                return Ok(Node { cell, piece: p + 1 });
            }
        }
        Ok(self.split(cell, t, m))
    }

    fn ensure_detail(&mut self, cell: usize, m: usize) {
        if !self.detailed[cell] {
            self.detailed[cell] = true;
            let pairs = self.pairs(m);
            let areas = if self.areas_ready && pairs > 0 {
                self.cell_areas[cell * pairs..(cell + 1) * pairs].to_vec()
            } else {
                Vec::new()
            };
            self.detail.insert(
                cell,
                CellDetail {
                    areas,
                    ..CellDetail::default()
                },
            );
        }
    }

    /// Inserts `u` into `cell` by a Brownian bridge between its neighbours.
    fn split(&mut self, cell: usize, u: f64, m: usize) -> Node {
        let start = self.cell_start(cell);
        let end = self.cell_start(cell + 1);
        let cell_dw: Vec<f64> = self.dw[cell * m..(cell + 1) * m].to_vec();
        let pairs = self.pairs(m);
        let with_areas = self.areas_ready && pairs > 0;
        let levy_terms = self.levy_terms.unwrap_or(1);
        self.ensure_detail(cell, m);
        let d = self.detail.get_mut(&cell).expect("detail present");
        let bridge = &mut self.bridge;
        let area_rng = &mut self.areas;
        let pos = d.points.partition_point(|&p| p < u);
        let (left_t, left_w): (f64, Vec<f64>) = if pos == 0 {
            (start, vec![0.0; m])
        } else {
            (
                d.points[pos - 1],
                d.offsets[(pos - 1) * m..pos * m].to_vec(),
            )
        };
        let (right_t, right_w): (f64, Vec<f64>) = if pos == d.points.len() {
            (end, cell_dw)
        } else {
            (d.points[pos], d.offsets[pos * m..(pos + 1) * m].to_vec())
        };
        let span = right_t - left_t;
        let frac = (u - left_t) / span;
        let sd = libm::sqrt((u - left_t) * (right_t - u) / span);
        let new_w: Vec<f64> = (0..m)
            .map(|k| {
                let z: f64 = StandardNormal.sample(bridge);
                quantize(left_w[k] + frac * (right_w[k] - left_w[k]) + sd * z)
            })
            .collect();
        d.points.insert(pos, u);
        for (k, v) in new_w.iter().enumerate() {
            d.offsets.insert(pos * m + k, *v);
        }
        if with_areas {
            // Chen's relation A = A_L + A_R + (dL_j dR_i - dL_i dR_j)/2 ties
            // the two halves to the existing area; the left half is drawn
            // from its conditional law given its increment.
            let dl: Vec<f64> = (0..m).map(|k| new_w[k] - left_w[k]).collect();
            let dr: Vec<f64> = (0..m).map(|k| right_w[k] - new_w[k]).collect();
            let parent: Vec<f64> = d.areas[pos * pairs..(pos + 1) * pairs].to_vec();
            let left_area = sample_levy_areas(area_rng, u - left_t, &dl, levy_terms);
            let mut right_area = vec![0.0; pairs];
            for j in 0..m {
                for i in j + 1..m {
                    let p = pair_index(m, j, i);
                    right_area[p] =
                        parent[p] - left_area[p] - (dl[j] * dr[i] - dl[i] * dr[j]) / 2.0;
                }
            }
            d.areas.splice(
                pos * pairs..(pos + 1) * pairs,
                left_area.into_iter().chain(right_area),
            );
        }
        Node {
            cell,
            piece: pos + 1,
        }
    }

    /// Draws the Lévy areas of every piece of the current partition, in time
    /// order. Called once when the source is built.
    fn fill_areas(&mut self, m: usize) {
        let pairs = self.pairs(m);
        if pairs == 0 {
            self.areas_ready = true;
            return;
        }
        let terms = self.levy_terms.unwrap_or(1);
        self.cell_areas = vec![0.0; self.cells * pairs];
        for cell in 0..self.cells {
            let cell_dw = &self.dw[cell * m..(cell + 1) * m];
            if !self.detailed[cell] {
                let a = sample_levy_areas(&mut self.areas, self.h_ref, cell_dw, terms);
                self.cell_areas[cell * pairs..(cell + 1) * pairs].copy_from_slice(&a);
                continue;
            }
            let start = cell as f64 * self.h_ref;
            let end = (cell + 1) as f64 * self.h_ref;
            let d = self.detail.get_mut(&cell).expect("detail present");
            let n = d.points.len() + 1;
            let mut areas = Vec::with_capacity(n * pairs);
            for p in 0..n {
                let t0 = if p == 0 { start } else { d.points[p - 1] };
                let t1 = if p + 1 == n { end } else { d.points[p] };
                let piece_dw: Vec<f64> = (0..m)
                    .map(|k| {
                        let w1 = if p + 1 == n {
                            cell_dw[k]
                        } else {
                            d.offsets[p * m + k]
                        };
                        let w0 = if p == 0 {
                            0.0
                        } else {
                            d.offsets[(p - 1) * m + k]
                        };
                        w1 - w0
                    })
                    .collect();
                areas.extend(sample_levy_areas(
                    &mut self.areas,
                    t1 - t0,
                    &piece_dw,
                    terms,
                ));
            }
            d.areas = areas;
        }
        self.areas_ready = true;
    }

    /// Visits the pieces between nodes `a < b` in time order with
    /// `(length, increment, areas)`.
    fn for_each_piece(&self, a: Node, b: Node, m: usize, mut f: impl FnMut(f64, &[f64], &[f64])) {
        let pairs = self.pairs(m);
        let mut buf = vec![0.0; m];
        let mut cur = a;
        while cur < b {
            let cell = cur.cell;
            let cell_dw = &self.dw[cell * m..(cell + 1) * m];
            if !self.detailed[cell] {
                let area = if pairs > 0 {
                    &self.cell_areas[cell * pairs..(cell + 1) * pairs]
                } else {
                    &[][..]
                };
                f(self.h_ref, cell_dw, area);
                cur = Node {
                    cell: cell + 1,
                    piece: 0,
                };
                continue;
            }
            let d = &self.detail[&cell];
            let n = d.points.len() + 1;
            let last = if b.cell == cell { b.piece } else { n };
            let start = self.cell_start(cell);
            let end = self.cell_start(cell + 1);
            for p in cur.piece..last {
                let t0 = if p == 0 { start } else { d.points[p - 1] };
                let t1 = if p + 1 == n { end } else { d.points[p] };
                for k in 0..m {
                    let w1 = if p + 1 == n {
                        cell_dw[k]
                    } else {
                        d.offsets[p * m + k]
                    };
                    let w0 = if p == 0 {
                        0.0
                    } else {
                        d.offsets[(p - 1) * m + k]
                    };
                    buf[k] = w1 - w0;
                }
                let area = if pairs > 0 && !d.areas.is_empty() {
                    &d.areas[p * pairs..(p + 1) * pairs]
                } else {
                    &[][..]
                };
                f(t1 - t0, &buf, area);
            }
            cur = if b.cell == cell {
                b
            } else {
                Node {
                    cell: cell + 1,
                    piece: 0,
                }
            };
        }
    }
}
