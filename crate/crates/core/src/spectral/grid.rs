use std::collections::HashMap;

/// Samples of a 2D spectrum on a regular (x, y) lattice starting at the
/// origin; row i is x = i·x_step, column j is y = j·y_step.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2d {
    rows: usize,
    cols: usize,
    x_step: f64,
    y_step: f64,
    values: Vec<f64>,
}

impl Spectrum2d {
    pub(crate) fn new(rows: usize, cols: usize, x_step: f64, y_step: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Spectrum2d {
            rows,
            cols,
            x_step,
            y_step,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fractional (x, y) bin indices of cell (i, j).
    pub fn index_of(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.x_step, j as f64 * self.y_step)
    }

    /// Cells not smaller than any of their eight (circular) neighbors,
    /// strongest first.
    pub(crate) fn local_maxima(&self) -> Vec<(usize, usize, f64)> {
        let (r, c) = (self.rows, self.cols);
        let mut out = Vec::new();
        for i in 0..r {
            for j in 0..c {
                let v = self.value(i, j);
                if !v.is_finite() {
                    continue;
                }
                let mut is_max = true;
                'nb: for di in [r - 1, 0, 1] {
                    for dj in [c - 1, 0, 1] {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        if self.value((i + di) % r, (j + dj) % c) > v {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if is_max {
                    out.push((i, j, v));
                }
            }
        }
        out.sort_by(|a, b| b.2.total_cmp(&a.2));
        out
    }
}

fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Greedy peak selection: take maxima strongest first, masking ±`exclusion`
/// native bins around every accepted peak. `accept` filters candidates
/// (search window).
pub(crate) fn select_peaks(
    maxima: &[(f64, f64, f64)],
    k: usize,
    periods: (f64, f64),
    exclusion: f64,
    accept: impl Fn(f64, f64) -> bool,
) -> Vec<(f64, f64, f64)> {
    let mut chosen: Vec<(f64, f64, f64)> = Vec::with_capacity(k);
    for &(x, y, v) in maxima {
        if chosen.len() == k {
            break;
        }
        if !accept(x, y) {
            continue;
        }
        let masked = chosen.iter().any(|&(cx, cy, _)| {
            circular_distance(x, cx, periods.0) <= exclusion
                && circular_distance(y, cy, periods.1) <= exclusion
        });
        if !masked {
            chosen.push((x, y, v));
        }
    }
    chosen
}

/// Lattice hill-climb for a local maximum of `f` on the fine grid
/// (x, y) = (i/os_x, j/os_y).
///
/// Starts at the lattice point nearest `start` with a stride of
/// `initial_stride` fine cells, moves to the best of the eight neighbors
/// while that improves, and halves the stride when the center wins. The
/// result is a local maximum of the fine lattice. `bounds`, in lattice
/// units, confines the search.
pub(crate) struct HillClimb {
    pub os_x: usize,
    pub os_y: usize,
    pub initial_stride: i64,
    pub bounds: Option<((i64, i64), (i64, i64))>,
}

impl HillClimb {
    pub(crate) fn run(&self, start: (f64, f64), mut f: impl FnMut(f64, f64) -> f64) -> (f64, f64, f64) {
        let (sx, sy) = (self.os_x as f64, self.os_y as f64);
        let mut cache: HashMap<(i64, i64), f64> = HashMap::new();
        let mut eval = |i: i64, j: i64| -> f64 {
            *cache
                .entry((i, j))
                .or_insert_with(|| f(i as f64 / sx, j as f64 / sy))
        };
        let inside = |i: i64, j: i64| match self.bounds {
            None => true,
            Some(((i0, i1), (j0, j1))) => i >= i0 && i <= i1 && j >= j0 && j <= j1,
        };

        let mut ci = (start.0 * sx).round() as i64;
        let mut cj = (start.1 * sy).round() as i64;
        if let Some(((i0, i1), (j0, j1))) = self.bounds {
            ci = ci.clamp(i0, i1);
            cj = cj.clamp(j0, j1);
        }
        let mut best = eval(ci, cj);
        let mut stride = self.initial_stride.max(1);
        loop {
            let mut moved = None;
            for di in -1..=1 {
                for dj in -1..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (i, j) = (ci + di * stride, cj + dj * stride);
                    if !inside(i, j) {
                        continue;
                    }
                    let v = eval(i, j);
                    if v > best {
                        best = v;
                        moved = Some((i, j));
                    }
                }
            }
            match moved {
                Some((i, j)) => {
                    ci = i;
                    cj = j;
                }
                None if stride == 1 => break,
                None => stride /= 2,
            }
        }
        (ci as f64 / sx, cj as f64 / sy, best)
    }
}
