//! Half-open token intervals and ordered unions of them.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "inverted span {start}..{end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn intersect(&self, other: Span) -> Option<Span> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start < end).then_some(Span { start, end })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Sorted, disjoint, non-adjacent, non-empty spans.
///
/// Arguments extracted by subtraction (an ancestor's text minus a
/// constituent) need not be contiguous, so argument regions are unions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region(Vec<Span>);

impl Region {
    pub fn empty() -> Self {
        Region(Vec::new())
    }

    pub fn from_span(span: Span) -> Self {
        Self::from_spans([span])
    }

    pub fn from_spans<I: IntoIterator<Item = Span>>(spans: I) -> Self {
        let mut v: Vec<Span> = spans.into_iter().filter(|s| !s.is_empty()).collect();
        v.sort();
        let mut merged: Vec<Span> = Vec::with_capacity(v.len());
        for s in v {
            match merged.last_mut() {
                Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
                _ => merged.push(s),
            }
        }
        Region(merged)
    }

    pub fn spans(&self) -> &[Span] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of tokens covered.
    pub fn len(&self) -> usize {
        self.0.iter().map(Span::len).sum()
    }

    pub fn start(&self) -> Option<usize> {
        self.0.first().map(|s| s.start)
    }

    /// Smallest single span covering the region.
    pub fn hull(&self) -> Option<Span> {
        Some(Span::new(self.0.first()?.start, self.0.last()?.end))
    }

    /// True when `span` lies entirely inside one piece of the region.
    pub fn contains_span(&self, span: Span) -> bool {
        self.0.iter().any(|s| s.contains(span))
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.0.iter().any(|s| s.start <= i && i < s.end)
    }

    pub fn overlaps(&self, span: Span) -> bool {
        self.0.iter().any(|s| s.overlaps(span))
    }

    pub fn intersect_span(&self, span: Span) -> Region {
        Region(self.0.iter().filter_map(|s| s.intersect(span)).collect())
    }

    pub fn subtract_span(&self, span: Span) -> Region {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        for s in &self.0 {
            if !s.overlaps(span) {
                out.push(*s);
                continue;
            }
            if s.start < span.start {
                out.push(Span::new(s.start, span.start));
            }
            if span.end < s.end {
                out.push(Span::new(span.end, s.end));
            }
        }
        Region(out)
    }

    /// Token indices in surface order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().flat_map(|s| s.start..s.end)
    }

    /// Drops tokens for which `is_trimmed` holds from both ends of the region.
    pub fn trim_by(&self, mut is_trimmed: impl FnMut(usize) -> bool) -> Region {
        let mut spans = self.0.clone();
        while let Some(first) = spans.first_mut() {
            while first.start < first.end && is_trimmed(first.start) {
                first.start += 1;
            }
            if first.is_empty() {
                spans.remove(0);
            } else {
                break;
            }
        }
        while let Some(last) = spans.last_mut() {
            while last.start < last.end && is_trimmed(last.end - 1) {
                last.end -= 1;
            }
            if last.is_empty() {
                spans.pop();
            } else {
                break;
            }
        }
        Region(spans)
    }

    /// Tokens of the region, in order.
    pub fn tokens<'a, S: AsRef<str>>(&'a self, source: &'a [S]) -> impl Iterator<Item = &'a str> + 'a {
        self.indices().map(move |i| source[i].as_ref())
    }
}

impl From<Span> for Region {
    fn from(span: Span) -> Self {
        Region::from_span(span)
    }
}
