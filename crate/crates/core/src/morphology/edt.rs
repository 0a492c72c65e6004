//! Exact squared Euclidean distance transform.
//!
//! One lower-envelope-of-parabolas pass per axis (Felzenszwalb and
//! Huttenlocher). Each axis pass is exact for the separable squared metric,
//! so the composed result equals the brute-force minimum over all foreground
//! voxel centres.

use crate::volume::{BinaryMask, Dims, Spacing};

/// How physical distance between voxel centres is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Unit spacing along every axis, regardless of the mask's spacing.
    #[default]
    VoxelIsotropic,
    /// The mask's own spacing, distances in millimetres.
    Physical,
}

impl DistanceMetric {
    /// Squared per-axis step lengths.
    pub fn axis_weights(self, spacing: Spacing) -> [f64; 3] {
        match self {
            DistanceMetric::VoxelIsotropic => [1.0; 3],
            DistanceMetric::Physical => [
                spacing.dx * spacing.dx,
                spacing.dy * spacing.dy,
                spacing.dz * spacing.dz,
            ],
        }
    }
}

/// Squared distance (in the chosen metric) from every voxel centre to the
/// nearest foreground voxel centre. Zero on foreground, `+inf` everywhere
/// when the source mask is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    dims: Dims,
    spacing: Spacing,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.dims.index(x, y, z)]
    }

    /// Voxels whose squared distance is at most `radius²`.
    pub fn within(&self, radius: f64) -> BinaryMask {
        let r2 = radius * radius;
        BinaryMask::from_parts_unchecked(
            self.dims,
            self.spacing,
            self.values.iter().map(|&v| v <= r2).collect(),
        )
    }
}

pub fn squared_edt(mask: &BinaryMask, metric: DistanceMetric) -> DistanceField {
    let dims = mask.dims();
    let weights = metric.axis_weights(mask.spacing());
    let mut values: Vec<f64> = mask
        .voxels()
        .iter()
        .map(|&v| if v { 0.0 } else { f64::INFINITY })
        .collect();

    if mask.is_empty() {
        return DistanceField {
            dims,
            spacing: mask.spacing(),
            values,
        };
    }

    let [nx, ny, nz] = dims.as_array();
    let longest = nx.max(ny).max(nz);
    let mut scratch = Envelope::with_capacity(longest);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];

    // (line length, stride, starting offsets of every line along this axis)
    type Starts = Box<dyn Fn() -> Vec<usize>>;
    let passes: [(usize, usize, Starts); 3] = [
        (
            nx,
            1,
            Box::new(move || (0..ny * nz).map(|r| r * nx).collect()),
        ),
        (
            ny,
            nx,
            Box::new(move || {
                (0..nz)
                    .flat_map(|z| (0..nx).map(move |x| x + nx * ny * z))
                    .collect()
            }),
        ),
        (nz, nx * ny, Box::new(move || (0..nx * ny).collect())),
    ];

    for (axis, (len, stride, starts)) in passes.iter().enumerate() {
        if *len == 1 {
            continue;
        }
        let w = weights[axis];
        for start in starts() {
            for (i, slot) in line[..*len].iter_mut().enumerate() {
                *slot = values[start + i * stride];
            }
            scratch.transform(&line[..*len], w, &mut out[..*len]);
            for (i, &v) in out[..*len].iter().enumerate() {
                values[start + i * stride] = v;
            }
        }
    }

    DistanceField {
        dims,
        spacing: mask.spacing(),
        values,
    }
}

/// Scratch space for the 1D lower envelope.
struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Envelope {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// `out[q] = min_p f[p] + w (q - p)²` over finite `f[p]`.
    fn transform(&mut self, f: &[f64], w: f64, out: &mut [f64]) {
        self.sites.clear();
        self.bounds.clear();
        let parabola = |p: usize, q: usize| {
            let d = q as f64 - p as f64;
            f[p] + w * d * d
        };

        for q in 0..f.len() {
            if !f[q].is_finite() {
                continue;
            }
            if self.sites.is_empty() {
                self.sites.push(q);
                self.bounds.push(f64::NEG_INFINITY);
                continue;
            }
            let mut s;
            loop {
                let v = *self.sites.last().unwrap();
                let qf = q as f64;
                let vf = v as f64;
                s = ((f[q] + w * qf * qf) - (f[v] + w * vf * vf)) / (2.0 * w * (qf - vf));
                // bounds[0] is -inf, so the first site is never popped.
                if s <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    break;
                }
            }
            self.sites.push(q);
            self.bounds.push(s);
        }

        if self.sites.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }

        let mut k = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            while k + 1 < self.sites.len() && self.bounds[k + 1] < q as f64 {
                k += 1;
            }
            // Neighbouring parabolas guard against rounding in the breakpoints.
            let mut best = parabola(self.sites[k], q);
            if k > 0 {
                best = best.min(parabola(self.sites[k - 1], q));
            }
            if k + 1 < self.sites.len() {
                best = best.min(parabola(self.sites[k + 1], q));
            }
            *slot = best;
        }
    }
}
