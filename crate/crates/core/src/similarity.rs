//! Event-based similarity between time series.
//!
//! Each series is reduced to a list of annotated events. Two series are
//! compared by pooling their events, clustering the pool by city-block
//! distance between feature vectors, and greedily pairing the closest
//! cross-series events inside each cluster. The similarity is the total
//! duration of the paired events over the total duration of all events.

use std::collections::HashSet;
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy;
use crate::matrix::SimilarityMatrix;

/// A region of interest inside one time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: String,
    pub series_id: String,
    /// Start time, in samples or seconds (uniform per dataset).
    pub start: f64,
    pub end: f64,
    pub features: Vec<f64>,
}

impl Event {
    pub fn new(
        series_id: impl Into<String>,
        event_id: impl Into<String>,
        start: f64,
        end: f64,
        features: Vec<f64>,
    ) -> Result<Self> {
        let event = Self {
            event_id: event_id.into(),
            series_id: series_id.into(),
            start,
            end,
            features,
        };
        event.validate()?;
        Ok(event)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::invalid(format!(
                "event `{}` has a non-finite timestamp",
                self.event_id
            )));
        }
        if self.end < self.start {
            return Err(Error::invalid(format!(
                "event `{}` ends ({}) before it starts ({})",
                self.event_id, self.end, self.start
            )));
        }
        if self.features.is_empty() {
            return Err(Error::invalid(format!(
                "event `{}` has no features",
                self.event_id
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "event `{}` has a non-finite feature",
                self.event_id
            )));
        }
        Ok(())
    }

    /// Duration of the event.
    pub fn length(&self) -> f64 {
        event_length(self)
    }

    pub fn dimension(&self) -> usize {
        self.features.len()
    }
}

/// A time series reduced to its events, ordered by start time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    series_id: String,
    events: Vec<Event>,
    /// Raw sample count, kept as metadata only.
    pub timestamps: Option<u64>,
}

impl EventSeries {
    pub fn new(series_id: impl Into<String>, mut events: Vec<Event>) -> Result<Self> {
        let series_id = series_id.into();
        for e in &events {
            e.validate()?;
            if e.series_id != series_id {
                return Err(Error::invalid(format!(
                    "event `{}` belongs to series `{}`, not `{series_id}`",
                    e.event_id, e.series_id
                )));
            }
        }
        if let Some(first) = events.first() {
            let p = first.dimension();
            if let Some(e) = events.iter().find(|e| e.dimension() != p) {
                return Err(Error::invalid(format!(
                    "event `{}` has {} features, expected {p}",
                    e.event_id,
                    e.dimension()
                )));
            }
        }
        events.sort_by(|a, b| a.start.total_cmp(&b.start));
        Ok(Self {
            series_id,
            events,
            timestamps: None,
        })
    }

    pub fn series_id(&self) -> &str {
        &self.series_id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Feature dimension shared by all events, if there are any.
    pub fn dimension(&self) -> Option<usize> {
        self.events.first().map(Event::dimension)
    }

    /// The same events under a different series id.
    pub fn relabeled(&self, series_id: impl Into<String>) -> Self {
        let series_id = series_id.into();
        let events = self
            .events
            .iter()
            .map(|e| Event {
                series_id: series_id.clone(),
                ..e.clone()
            })
            .collect();
        Self {
            series_id,
            events,
            timestamps: self.timestamps,
        }
    }

    fn total_length(&self) -> f64 {
        self.events.iter().map(event_length).sum()
    }
}

/// Two events judged to be the same occurrence in two different series.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPair {
    pub left: Event,
    pub right: Event,
    pub distance: f64,
}

impl EventPair {
    pub fn length(&self) -> f64 {
        pair_length(self)
    }
}

/// Sum of absolute coordinate differences.
pub fn cityblock_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "feature dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("feature vectors must not be empty"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("feature vectors must be finite"));
    }
    Ok(manhattan(a, b))
}

#[inline]
fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn event_length(e: &Event) -> f64 {
    (e.end - e.start).abs()
}

pub fn pair_length(p: &EventPair) -> f64 {
    event_length(&p.left) + event_length(&p.right)
}

fn check_dimensions(a: &EventSeries, b: &EventSeries) -> Result<()> {
    match (a.dimension(), b.dimension()) {
        (Some(p), Some(q)) if p != q => Err(Error::invalid(format!(
            "series `{}` has {p} features per event but `{}` has {q}",
            a.series_id, b.series_id
        ))),
        _ => Ok(()),
    }
}

/// Pairs of `(index in first, index in second)` with their distance.
type IndexPair = (usize, usize, f64);

/// Core of the common-event extraction over series already in canonical order.
fn common_event_indices(first: &EventSeries, second: &EventSeries) -> Result<Vec<IndexPair>> {
    let na = first.events.len();
    let nb = second.events.len();
    if na == 0 || nb == 0 {
        return Ok(Vec::new());
    }
    let pooled: Vec<&[f64]> = first
        .events
        .iter()
        .chain(&second.events)
        .map(|e| e.features.as_slice())
        .collect();
    let m = pooled.len();

    let mut dist = vec![0.0; m * m];
    let mut d_max = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = manhattan(pooled[i], pooled[j]);
            dist[i * m + j] = d;
            dist[j * m + i] = d;
            d_max = d_max.max(d);
        }
    }

    // Event clusters as lists of pooled indices.
    let groups: Vec<Vec<usize>> = if d_max == 0.0 {
        vec![(0..m).collect()]
    } else {
        let width = m.to_string().len();
        let ids = (0..m).map(|i| format!("{i:0width$}")).collect();
        let sims = SimilarityMatrix::from_upper(ids, |i, j| {
            (1.0 - dist[i * m + j] / d_max).clamp(0.0, 1.0)
        })?;
        let threshold = hierarchy::compute_threshold(&sims)?;
        hierarchy::build_dendrogram(&sims)?.cut(threshold.t)
    };

    let mut pairs = Vec::new();
    for group in groups {
        let mut left: Vec<usize> = group.iter().copied().filter(|&i| i < na).collect();
        let mut right: Vec<usize> = group.iter().copied().filter(|&i| i >= na).collect();
        while !left.is_empty() && !right.is_empty() {
            // Candidates are scanned in (left index, right index) order, so the
            // first strict minimum is also the lexicographically smallest tie.
            let mut chosen = (0, 0, f64::INFINITY);
            for (li, &a) in left.iter().enumerate() {
                for (ri, &b) in right.iter().enumerate() {
                    let d = dist[a * m + b];
                    if d < chosen.2 {
                        chosen = (li, ri, d);
                    }
                }
            }
            let (li, ri, d) = chosen;
            pairs.push((left[li], right[ri] - na, d));
            left.remove(li);
            right.remove(ri);
        }
    }
    pairs.sort_by_key(|&(a, b, _)| (a, b));
    Ok(pairs)
}

fn canonical_order<'a>(
    a: &'a EventSeries,
    b: &'a EventSeries,
) -> Result<(&'a EventSeries, &'a EventSeries, bool)> {
    if a.series_id == b.series_id {
        return Err(Error::invalid(format!(
            "cannot compare series `{}` with itself",
            a.series_id
        )));
    }
    check_dimensions(a, b)?;
    Ok(if a.series_id < b.series_id {
        (a, b, false)
    } else {
        (b, a, true)
    })
}

/// Events common to both series, as matched pairs with `left` taken from `a`.
pub fn extract_common_events(a: &EventSeries, b: &EventSeries) -> Result<Vec<EventPair>> {
    let (first, second, swapped) = canonical_order(a, b)?;
    let pairs = common_event_indices(first, second)?
        .into_iter()
        .map(|(i, j, distance)| {
            let (x, y) = (first.events[i].clone(), second.events[j].clone());
            let (left, right) = if swapped { (y, x) } else { (x, y) };
            EventPair {
                left,
                right,
                distance,
            }
        })
        .collect();
    Ok(pairs)
}

/// Duration of common events over the duration of all events, in `[0, 1]`.
///
/// Two series without any events are considered identical.
pub fn series_similarity(a: &EventSeries, b: &EventSeries) -> Result<f64> {
    let (first, second, _) = canonical_order(a, b)?;
    let total = first.total_length() + second.total_length();
    if total == 0.0 {
        return Ok(1.0);
    }
    let common: f64 = common_event_indices(first, second)?
        .into_iter()
        .map(|(i, j, _)| event_length(&first.events[i]) + event_length(&second.events[j]))
        .sum();
    Ok((common / total).clamp(0.0, 1.0))
}

/// Size of the intersection over size of the union; 1 for two empty sets.
pub fn jaccard_similarity<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Pairwise similarity matrix over a dataset of series.
///
/// Each unordered pair is evaluated exactly once (in parallel on the current
/// rayon pool), so the result does not depend on scheduling.
pub fn build_similarity_matrix(dataset: &[EventSeries]) -> Result<SimilarityMatrix> {
    if dataset.is_empty() {
        return Err(Error::degenerate("the dataset contains no series"));
    }
    let ids: Vec<String> = dataset.iter().map(|s| s.series_id.clone()).collect();
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::invalid(format!("duplicate series id `{dup}`")));
    }
    let mut dims = dataset.iter().filter_map(EventSeries::dimension);
    if let Some(p) = dims.next() {
        if let Some(q) = dims.find(|&q| q != p) {
            return Err(Error::invalid(format!(
                "inconsistent feature dimension in dataset: {p} vs {q}"
            )));
        }
    }

    let n = dataset.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| series_similarity(&dataset[i], &dataset[j]))
        .collect::<Result<Vec<f64>>>()?;
    let mut it = values.into_iter();
    SimilarityMatrix::from_upper(ids, |_, _| it.next().expect("one value per pair"))
}
