use serde::{Deserialize, Serialize};

use super::{DataError, TokenStream};

pub const MAX_WINDOW: usize = 2048;
pub const DEFAULT_STRIDE: usize = 1024;

/// Token range `[start, end)` of one stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeWindow {
    pub origin_id: String,
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<String>,
}

/// Windows at `0, stride, 2*stride, ...` while they fit, plus an end-aligned
/// window if the tail is not yet covered.
pub fn segment_windows(stream: &TokenStream, window: usize, stride: usize) -> Result<Vec<CodeWindow>, DataError> {
    if window == 0 || window > MAX_WINDOW {
        return Err(DataError::InvalidWindow(format!("window must be in 1..={MAX_WINDOW}, got {window}")));
    }
    if stride == 0 || stride > window {
        return Err(DataError::InvalidWindow(format!("stride must be in 1..={window}, got {stride}")));
    }
    let len = stream.len();
    let mut ranges = Vec::new();
    if len == 0 {
        return Ok(Vec::new());
    }
    if len < window {
        ranges.push((0, len));
    } else {
        let mut start = 0;
        while start + window <= len {
            ranges.push((start, start + window));
            start += stride;
        }
        if ranges.last().is_some_and(|&(_, e)| e < len) {
            ranges.push((len - window, len));
        }
    }
    Ok(ranges
        .into_iter()
        .map(|(start, end)| CodeWindow {
            origin_id: stream.origin_id.clone(),
            start,
            end,
            tokens: stream.tokens[start..end].to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(n: usize) -> TokenStream {
        TokenStream::new("s", (0..n).map(|i| i.to_string()).collect())
    }

    fn spans(n: usize, w: usize, s: usize) -> Vec<(usize, usize)> {
        segment_windows(&stream(n), w, s).unwrap().iter().map(|c| (c.start, c.end)).collect()
    }

    #[test]
    fn placement_examples() {
        assert_eq!(spans(3000, 2048, 1024), [(0, 2048), (952, 3000)]);
        assert_eq!(spans(100, 2048, 1024), [(0, 100)]);
        assert_eq!(spans(4096, 2048, 1024), [(0, 2048), (1024, 3072), (2048, 4096)]);
        assert!(spans(0, 2048, 1024).is_empty());
        assert!(segment_windows(&stream(5), 4, 5).is_err());
        assert!(segment_windows(&stream(5), 4096, 5).is_err());
    }

    proptest! {
        #[test]
        fn cover_and_bound(n in 0usize..7000, w in 1usize..=2048, s_frac in 0.01f64..=1.0) {
            let s = ((w as f64 * s_frac) as usize).max(1);
            let ws = segment_windows(&stream(n), w, s).unwrap();
            let mut covered = vec![false; n];
            for c in &ws {
                prop_assert!(c.end - c.start <= MAX_WINDOW && c.end - c.start <= w);
                prop_assert_eq!(c.tokens.len(), c.end - c.start);
                covered[c.start..c.end].iter_mut().for_each(|x| *x = true);
            }
            prop_assert!(covered.iter().all(|&x| x));
        }
    }
}
