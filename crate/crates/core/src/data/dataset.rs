use crate::data::{EncodedInstance, RawRecord, Vocabulary};
use crate::error::{Error, Result};
use crate::numeric::Rng;

/// Borrowed view of one encoded instance.
#[derive(Clone, Copy, Debug)]
pub struct InstanceRef<'a> {
    pub label: f64,
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

/// Column-packed encoded instances: `indices` and `values` are `len × fields`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    fields: usize,
    labels: Vec<f64>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// A dense mini-batch; same layout as [`Dataset`].
pub type Batch = Dataset;

impl Dataset {
    pub fn with_fields(fields: usize) -> Self {
        Self {
            fields,
            labels: Vec::new(),
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_instances(fields: usize, instances: &[EncodedInstance]) -> Self {
        let mut ds = Self::with_fields(fields);
        for inst in instances {
            ds.push(inst.label, &inst.indices, &inst.values);
        }
        ds
    }

    pub fn encode(records: &[RawRecord], vocab: &Vocabulary) -> Result<Self> {
        let mut ds = Self::with_fields(vocab.len());
        for (row, r) in records.iter().enumerate() {
            let inst = vocab
                .encode(r)
                .map_err(|e| Error::data(format!("record {row}: {e}")))?;
            ds.push(inst.label, &inst.indices, &inst.values);
        }
        Ok(ds)
    }

    pub fn push(&mut self, label: f64, indices: &[usize], values: &[f64]) {
        assert_eq!(indices.len(), self.fields);
        assert_eq!(values.len(), self.fields);
        self.labels.push(label);
        self.indices.extend_from_slice(indices);
        self.values.extend_from_slice(values);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn fields(&self) -> usize {
        self.fields
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> InstanceRef<'_> {
        let f = self.fields;
        InstanceRef {
            label: self.labels[i],
            indices: &self.indices[i * f..(i + 1) * f],
            values: &self.values[i * f..(i + 1) * f],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = InstanceRef<'_>> {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut out = Self::with_fields(self.fields);
        out.labels.reserve(rows.len());
        for &r in rows {
            let inst = self.get(r);
            out.push(inst.label, inst.indices, inst.values);
        }
        out
    }

    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().sum::<f64>() / self.len() as f64
    }

    pub fn validate(&self, cardinalities: &[usize]) -> Result<()> {
        if cardinalities.len() != self.fields {
            return Err(Error::data(format!(
                "dataset has {} fields, model expects {}",
                self.fields,
                cardinalities.len()
            )));
        }
        for (row, inst) in self.iter().enumerate() {
            for (field, (&idx, &card)) in inst.indices.iter().zip(cardinalities).enumerate() {
                if idx >= card {
                    return Err(Error::data(format!(
                        "row {row}, field {field}: index {idx} out of range (cardinality {card})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Shuffles with `seed` and splits 8:1:1; the remainder goes to the training split.
pub fn split_dataset<T: Clone>(records: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = records.len();
    if n < 10 {
        return Err(Error::data(format!("need at least 10 records to split 8:1:1, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let n_val = n / 10;
    let n_test = n / 10;
    let n_train = n - n_val - n_test;
    let pick = |range: &[usize]| range.iter().map(|&i| records[i].clone()).collect::<Vec<T>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_val]),
        pick(&order[n_train + n_val..]),
    ))
}

/// Yields mini-batches covering every instance exactly once.
pub struct BatchIter<'a> {
    dataset: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl<'a> BatchIter<'a> {
    /// `shuffle = Some((seed, epoch))` permutes deterministically per epoch;
    /// `None` keeps dataset order.
    pub fn new(dataset: &'a Dataset, batch_size: usize, shuffle: Option<(u64, u64)>) -> Self {
        assert!(batch_size >= 1, "batch size must be at least 1");
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        if let Some((seed, epoch)) = shuffle {
            Rng::derived(seed, epoch).shuffle(&mut order);
        }
        Self {
            dataset,
            order,
            batch_size,
            cursor: 0,
        }
    }
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.dataset.select(&self.order[self.cursor..end]);
        self.cursor = end;
        Some(batch)
    }
}

pub fn batch_iter(dataset: &Dataset, batch_size: usize, shuffle_seed: u64, epoch: u64) -> BatchIter<'_> {
    BatchIter::new(dataset, batch_size, Some((shuffle_seed, epoch)))
}
