use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use super::augment::{augment, AugmentConfig};
use super::image::{load_sample, LoadOptions};
use super::index::{DatasetIndex, Split};
use crate::error::DataError;
use crate::tensor::Tensor;

/// Stacked samples: images `[b, 3, size, size]`, one-hot labels `[b, classes]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub images: Tensor<f32>,
    pub labels: Tensor<f32>,
    pub classes: Vec<usize>,
    pub paths: Vec<PathBuf>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// `ceil(samples / batch_size)`; the last batch may be partial.
pub fn batch_count(samples: usize, batch_size: usize) -> usize {
    samples.div_ceil(batch_size)
}

/// Lazily decoding batch iterator over one split.
pub struct BatchIter<'a, R: Rng + ?Sized> {
    index: &'a DatasetIndex,
    split: Split,
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    augment: Option<AugmentConfig>,
    opts: LoadOptions,
    rng: &'a mut R,
}

/// Batches of `split`. Training batches are shuffled (when `shuffle`) and
/// augmented with draws from `rng`; the test split is never shuffled or
/// augmented. The final partial batch is kept.
pub fn batches<'a, R: Rng + ?Sized>(
    index: &'a DatasetIndex,
    split: Split,
    batch_size: usize,
    shuffle: bool,
    cfg: &AugmentConfig,
    opts: LoadOptions,
    rng: &'a mut R,
) -> Result<BatchIter<'a, R>, DataError> {
    let n = index.entries(split).len();
    if n == 0 {
        return Err(DataError::EmptySplit(split.to_string()));
    }
    if batch_size == 0 {
        return Err(DataError::EmptySplit(format!("{split} (batch size 0)")));
    }
    cfg.validate()?;
    let training = split == Split::Train;
    let mut order: Vec<usize> = (0..n).collect();
    if training && shuffle {
        order.shuffle(rng);
    }
    let augment = (training && cfg.enabled).then(|| cfg.clone());
    Ok(BatchIter { index, split, order, pos: 0, batch_size, augment, opts, rng })
}

impl<R: Rng + ?Sized> BatchIter<'_, R> {
    pub fn num_batches(&self) -> usize {
        batch_count(self.order.len(), self.batch_size)
    }

    fn load(&mut self, ids: &[usize]) -> Result<Batch, DataError> {
        let entries = self.index.entries(self.split);
        let c = self.index.num_classes();
        let s = self.opts.size;
        let mut images = Vec::with_capacity(ids.len() * 3 * s * s);
        let mut labels = Vec::with_capacity(ids.len() * c);
        let mut classes = Vec::with_capacity(ids.len());
        let mut paths = Vec::with_capacity(ids.len());
        for &i in ids {
            let e = &entries[i];
            let mut sample = load_sample(&e.path, e.label, c, self.opts)?;
            if let Some(cfg) = &self.augment {
                sample = augment(&sample, cfg, &mut *self.rng);
            }
            images.extend_from_slice(sample.pixels.data());
            labels.extend_from_slice(sample.label.data());
            classes.push(e.label);
            paths.push(sample.source_path);
        }
        let b = ids.len();
        Ok(Batch {
            images: Tensor::new([b, 3, s, s], images).expect("stacked images"),
            labels: Tensor::new([b, c], labels).expect("stacked labels"),
            classes,
            paths,
        })
    }
}

impl<R: Rng + ?Sized> Iterator for BatchIter<'_, R> {
    type Item = Result<Batch, DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let ids = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(self.load(&ids))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = batch_count(self.order.len() - self.pos, self.batch_size);
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::scan_dataset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn fixture(per_class: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for split in ["train", "test"] {
            for (c, class) in ["a", "b"].iter().enumerate() {
                let d = dir.path().join(split).join(class);
                std::fs::create_dir_all(&d).unwrap();
                for i in 0..per_class {
                    let v = (40 * i + 100 * c) as u8;
                    ::image::RgbImage::from_pixel(5, 5, ::image::Rgb([v, v, v]))
                        .save(d.join(format!("{i}.png")))
                        .unwrap();
                }
            }
        }
        dir
    }

    const OPTS: LoadOptions = LoadOptions { size: 4, normalization: crate::data::Normalization::Scale01 };

    #[test]
    fn counts_and_partial_batch() {
        assert_eq!(batch_count(1950, 8), 244);
        assert_eq!(1950 - 243 * 8, 6);
        let dir = fixture(5);
        let idx = scan_dataset(dir.path()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let it = batches(&idx, Split::Train, 4, true, &AugmentConfig::default(), OPTS, &mut rng).unwrap();
        assert_eq!(it.num_batches(), 3);
        let sizes: Vec<usize> = it.map(|b| b.unwrap().len()).collect();
        assert_eq!(sizes, [4, 4, 2]);
    }

    #[test]
    fn epoch_visits_each_sample_once_and_repeats_with_seed() {
        let dir = fixture(5);
        let idx = scan_dataset(dir.path()).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            batches(&idx, Split::Train, 3, true, &AugmentConfig::default(), OPTS, &mut rng)
                .unwrap()
                .map(Result::unwrap)
                .collect::<Vec<_>>()
        };
        let a = run(7);
        assert_eq!(a, run(7));
        let seen: Vec<PathBuf> = a.iter().flat_map(|b| b.paths.clone()).collect();
        let unique: BTreeSet<_> = seen.iter().cloned().collect();
        assert_eq!(seen.len(), 10);
        assert_eq!(unique, idx.train.iter().map(|e| e.path.clone()).collect());
        for b in &a {
            for (row, &c) in b.labels.data().chunks(2).zip(&b.classes) {
                assert_eq!(row[c], 1.0);
            }
        }
    }

    #[test]
    fn eval_split_ignores_seed_and_augmentation() {
        let dir = fixture(3);
        let idx = scan_dataset(dir.path()).unwrap();
        let first = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            batches(&idx, Split::Test, 4, true, &AugmentConfig::default(), OPTS, &mut rng)
                .unwrap()
                .next()
                .unwrap()
                .unwrap()
        };
        let a = first(1);
        assert_eq!(a, first(99));
        let expected: Vec<PathBuf> = idx.test[..4].iter().map(|e| e.path.clone()).collect();
        assert_eq!(a.paths, expected);
    }

    #[test]
    fn empty_split_is_an_error() {
        let idx = DatasetIndex { root: PathBuf::new(), class_names: vec!["a".into()], train: vec![], test: vec![] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(batches(&idx, Split::Train, 8, true, &AugmentConfig::default(), OPTS, &mut rng).is_err());
    }
}
