use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::MetricsError;
use crate::image::ImageBuffer;

/// Seeded random-projection features: area-downsample to a `grid x grid`
/// RGB thumbnail, scale samples to `[0, 1]`, multiply by a fixed Gaussian
/// matrix and rectify. Stands in for a pretrained backbone at desk scale.
#[derive(Clone, Debug)]
pub struct RandomProjection {
    grid: usize,
    dim: usize,
    seed: u64,
    weights: Vec<f64>,
}

impl RandomProjection {
    pub fn new(grid: usize, dim: usize, seed: u64) -> Self {
        assert!(
            grid > 0 && dim > 0,
            "projection needs a positive grid and dimension"
        );
        let inputs = grid * grid * 3;
        let scale = 1.0 / (inputs as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..dim * inputs)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Self {
            grid,
            dim,
            seed,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major `dim x (3 * grid^2)` projection matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Block-average thumbnail, channel-interleaved, scaled to `[0, 1]`.
    pub fn thumbnail(&self, img: &ImageBuffer) -> Vec<f64> {
        let g = self.grid;
        let (w, h) = (img.width(), img.height());
        let span = |cell: usize, n: usize| {
            let start = cell * n / g;
            let end = ((cell + 1) * n / g).max(start + 1).min(n);
            (start.min(n - 1), end)
        };
        let mut out = Vec::with_capacity(g * g * 3);
        for gy in 0..g {
            let (y0, y1) = span(gy, h);
            for gx in 0..g {
                let (x0, x1) = span(gx, w);
                let mut acc = [0.0f64; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = img.pixel(x, y);
                        for c in 0..3 {
                            acc[c] += p[c] as f64;
                        }
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                out.extend(acc.iter().map(|a| a / n / 255.0));
            }
        }
        out
    }

    pub fn extract(&self, img: &ImageBuffer) -> Vec<f64> {
        let thumb = self.thumbnail(img);
        self.weights
            .chunks_exact(thumb.len())
            .map(|row| {
                row.iter()
                    .zip(&thumb)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect()
    }
}

/// Precomputed features keyed by image id, loaded from CSV.
#[derive(Clone, Debug, Default)]
pub struct FeatureTable {
    rows: Vec<(String, Vec<f64>)>,
    index: HashMap<String, usize>,
}

impl FeatureTable {
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Self {
        let index = rows
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), i))
            .collect();
        Self { rows, index }
    }

    pub fn get(&self, id: &str) -> Result<&[f64], MetricsError> {
        self.index
            .get(id)
            .map(|&i| self.rows[i].1.as_slice())
            .ok_or_else(|| MetricsError::MissingKey(id.to_string()))
    }

    pub fn into_rows(self) -> Vec<(String, Vec<f64>)> {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map(|r| r.1.len()).unwrap_or(0)
    }

    /// Header `id,f0,...,f{d-1}`; the header width fixes the dimension.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let err = |message: String| MetricsError::FeatureFile {
            path: path.display().to_string(),
            message,
        };
        let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let dim = reader
            .headers()
            .map_err(|e| err(e.to_string()))?
            .len()
            .saturating_sub(1);
        if dim == 0 {
            return Err(err("header declares no feature columns".into()));
        }
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| err(e.to_string()))?;
            if record.len() != dim + 1 {
                return Err(err(format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    record.len(),
                    dim + 1
                )));
            }
            let values = record
                .iter()
                .skip(1)
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(format!("row {}: {e}", line + 1)))?;
            rows.push((record[0].to_string(), values));
        }
        Ok(Self::from_rows(rows))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim()).map(|i| format!("f{i}")));
        writer.write_record(&header)?;
        for (id, values) in &self.rows {
            let mut record = vec![id.clone()];
            record.extend(values.iter().map(|v| format!("{v}")));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Where feature vectors come from.
#[derive(Clone, Debug)]
pub enum FeatureExtractor {
    RandomProjection(RandomProjection),
    Table(FeatureTable),
}

impl FeatureExtractor {
    /// Features for `img`; table-backed extractors look up `image_id` instead.
    pub fn extract(&self, img: &ImageBuffer, image_id: &str) -> Result<Vec<f64>, MetricsError> {
        match self {
            FeatureExtractor::RandomProjection(p) => Ok(p.extract(img)),
            FeatureExtractor::Table(t) => t.get(image_id).map(<[f64]>::to_vec),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::test_pattern;

    /// Separate, loop-only pipeline: per-cell averages, then a dot product
    /// against freshly drawn weights.
    fn reference(img: &ImageBuffer, grid: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut thumb = vec![];
        for gy in 0..grid {
            for gx in 0..grid {
                let y0 = gy * img.height() / grid;
                let y1 = (gy + 1) * img.height() / grid;
                let x0 = gx * img.width() / grid;
                let x1 = (gx + 1) * img.width() / grid;
                for c in 0..3 {
                    let mut s = 0.0;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            s += img.data()[(y * img.width() + x) * 3 + c] as f64;
                        }
                    }
                    thumb.push(s / ((y1 - y0) * (x1 - x0)) as f64 / 255.0);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = thumb.len();
        let mut out = vec![];
        for _ in 0..dim {
            let mut acc = 0.0;
            for t in &thumb {
                let z: f64 = StandardNormal.sample(&mut rng);
                acc += z / (n as f64).sqrt() * t;
            }
            out.push(if acc > 0.0 { acc } else { 0.0 });
        }
        out
    }

    #[test]
    fn deterministic_per_seed() {
        let img = test_pattern(32, 32);
        let a = RandomProjection::new(8, 64, 42).extract(&img);
        let b = RandomProjection::new(8, 64, 42).extract(&img);
        let c = RandomProjection::new(8, 64, 43).extract(&img);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn black_image_maps_to_zero() {
        let img = ImageBuffer::filled(16, 16, [0, 0, 0]).unwrap();
        assert!(RandomProjection::new(4, 16, 1)
            .extract(&img)
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn matches_reference_pipeline() {
        let img = test_pattern(32, 24);
        let got = RandomProjection::new(8, 64, 42).extract(&img);
        let want = reference(&img, 8, 64, 42);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_images_still_project() {
        let img = test_pattern(3, 2);
        let v = RandomProjection::new(8, 10, 0).extract(&img);
        assert_eq!(v.len(), 10);
        assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn table_lookup_and_csv_round_trip() {
        let table = FeatureTable::from_rows(vec![
            ("a".into(), vec![1.0, 2.5]),
            ("b".into(), vec![-0.5, 0.0]),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        table
            .write_csv(std::fs::File::create(&path).unwrap())
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,f0,f1\n"));
        let back = FeatureTable::from_csv(&path).unwrap();
        assert_eq!(back.get("b").unwrap(), &[-0.5, 0.0]);
        let ex = FeatureExtractor::Table(back);
        let img = test_pattern(4, 4);
        assert_eq!(ex.extract(&img, "a").unwrap(), vec![1.0, 2.5]);
        assert!(matches!(
            ex.extract(&img, "zzz"),
            Err(MetricsError::MissingKey(_))
        ));
    }
}
