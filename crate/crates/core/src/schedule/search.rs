use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::threshold::{find_threshold, PolicySpec, ThresholdOptions};
use super::{Protocol, ScheduleResult, Sequence};
use crate::hypergraph::Color;
use crate::states::NoiseKind;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchSpace {
    /// Three consecutive permutations of the palette.
    TriplePerms,
    /// Every sequence of the given length over the palette.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub sequence: Sequence,
    pub p_min: f64,
    pub violations: usize,
}

fn permutations(items: &[Color]) -> Vec<Vec<Color>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &c) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, c);
            out.push(p);
        }
    }
    out
}

/// All concatenations of `blocks` palette permutations, lexicographic.
pub fn triple_permutations(palette: &[Color], blocks: usize) -> Vec<Sequence> {
    let perms = permutations(palette);
    let mut seqs: Vec<Vec<Color>> = vec![Vec::new()];
    for _ in 0..blocks {
        seqs = seqs
            .into_iter()
            .flat_map(|s| {
                perms.iter().map(move |p| {
                    let mut s = s.clone();
                    s.extend_from_slice(p);
                    s
                })
            })
            .collect();
    }
    let mut out: Vec<Sequence> = seqs.into_iter().filter_map(|s| Sequence::new(s).ok()).collect();
    out.sort();
    out
}

fn all_sequences(palette: &[Color], length: usize) -> Vec<Sequence> {
    let k = palette.len();
    let total = k.pow(length as u32);
    (0..total)
        .filter_map(|mut i| {
            let mut steps = vec![palette[0]; length];
            for s in steps.iter_mut().rev() {
                *s = palette[i % k];
                i /= k;
            }
            Sequence::new(steps).ok()
        })
        .collect()
}

/// Scores every candidate by its threshold and ranks by `(p_min, sequence)`.
pub fn search_sequences(
    protocol: &Protocol,
    kind: NoiseKind,
    length: usize,
    space: SearchSpace,
    opts: &ThresholdOptions,
) -> ScheduleResult<Vec<SearchEntry>> {
    let mut palette = protocol.coloring().palette();
    palette.sort();
    let candidates = match space {
        SearchSpace::TriplePerms => triple_permutations(&palette, length.div_ceil(palette.len().max(1))),
        SearchSpace::Full => all_sequences(&palette, length),
    };
    let opts = ThresholdOptions {
        strict: false,
        ..opts.clone()
    };
    let mut entries = candidates
        .into_par_iter()
        .map(|seq| {
            let r = find_threshold(protocol, kind, &PolicySpec::Fixed(seq.clone()), &opts)?;
            Ok(SearchEntry {
                sequence: seq,
                p_min: r.p_min,
                violations: r.violations.len(),
            })
        })
        .collect::<ScheduleResult<Vec<_>>>()?;
    entries.sort_by(|a, b| a.p_min.total_cmp(&b.p_min).then_with(|| a.sequence.cmp(&b.sequence)));
    Ok(entries)
}
