use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use ndarray::Array1;
use serde::Serialize;

use super::TrendSeries;
use crate::annotate::{EntityPair, YearMonth};
use crate::error::{Error, Result};

/// Weighted relative change of the top components against the mean of the
/// preceding window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChangeRateReport {
    pub window: usize,
    /// Components whose changes are tracked, as indices into the series.
    pub top: Vec<usize>,
    /// `Δ_t` per month; `None` where undefined.
    pub delta: Vec<Option<f64>>,
}

impl ChangeRateReport {
    /// Months with a defined change rate.
    pub fn valid_months(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.delta
            .iter()
            .enumerate()
            .filter_map(|(t, d)| d.map(|d| (t, d)))
    }

    /// The month with the largest change rate (earliest on ties).
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (t, d) in self.valid_months() {
            if best.map_or(true, |(_, b)| d > b) {
                best = Some((t, d));
            }
        }
        best.map(|(t, _)| t)
    }
}

/// `Δ_t = Σ_i w_{t,i} |d_{t,i} − d̄_i| / d̄_i` over the `top` components,
/// where `d̄_i` is the mean of the present months among the `window`
/// preceding ones and `w_{t,i} = d_{t,i} / Σ_j d_{t,j}`.
///
/// Components with `d̄_i = 0` are left out and the weights renormalised
/// over the rest. `Δ_t` is `None` for `t < window`, for empty months, when
/// the whole window is empty, and when no component survives.
pub fn change_rate(
    means: &[Option<Array1<f64>>],
    top: &[usize],
    window: usize,
) -> Result<ChangeRateReport> {
    if window == 0 {
        return Err(Error::Config("window must be positive".into()));
    }
    if window >= means.len() {
        return Err(Error::Config(format!(
            "window {window} needs more than {} months",
            means.len()
        )));
    }
    if top.is_empty() {
        return Err(Error::Config("no components to track".into()));
    }
    let mut delta = vec![None; means.len()];
    for t in window..means.len() {
        let Some(cur) = &means[t] else { continue };
        let present: Vec<&Array1<f64>> = means[t - window..t].iter().flatten().collect();
        if present.is_empty() {
            continue;
        }
        let mut weight_sum = 0.0;
        let mut acc = 0.0;
        for &i in top {
            // offset form keeps the mean of a constant window exact
            let base = present[0][i];
            let prev = base
                + present.iter().map(|m| m[i] - base).sum::<f64>() / present.len() as f64;
            if prev == 0.0 {
                continue;
            }
            weight_sum += cur[i];
            acc += cur[i] * (cur[i] - prev).abs() / prev;
        }
        if weight_sum > 0.0 {
            delta[t] = Some(acc / weight_sum);
        }
    }
    Ok(ChangeRateReport {
        window,
        top: top.to_vec(),
        delta,
    })
}

impl TrendSeries {
    /// [`change_rate`] over the three components with the largest overall
    /// mean.
    pub fn change_rate(&self, window: usize) -> Result<ChangeRateReport> {
        change_rate(&self.means, &self.top(3), window)
    }
}

/// Mean change rate in key-event months against the other months.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Alignment {
    pub key_mean: f64,
    pub other_mean: f64,
    /// `(key − other) / other`.
    pub relative_difference: f64,
}

impl Alignment {
    fn new(key_mean: f64, other_mean: f64) -> Result<Self> {
        if other_mean == 0.0 {
            return Err(Error::Undefined(
                "relative difference against a zero mean".into(),
            ));
        }
        Ok(Alignment {
            key_mean,
            other_mean,
            relative_difference: (key_mean - other_mean) / other_mean,
        })
    }
}

/// Splits the months with a defined change rate into key and other months.
/// Key months without a defined rate are ignored.
pub fn key_event_alignment(report: &ChangeRateReport, key_months: &BTreeSet<usize>) -> Result<Alignment> {
    let (mut key, mut other) = (Vec::new(), Vec::new());
    for (t, d) in report.valid_months() {
        if key_months.contains(&t) {
            key.push(d);
        } else {
            other.push(d);
        }
    }
    if key.is_empty() || other.is_empty() {
        return Err(Error::Undefined(format!(
            "{} key and {} other month(s) with a defined change rate",
            key.len(),
            other.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Alignment::new(mean(&key), mean(&other))
}

/// Averages key and other means across pairs, then takes the relative
/// difference of the averages.
pub fn macro_alignment(per_pair: &[Alignment]) -> Result<Alignment> {
    if per_pair.is_empty() {
        return Err(Error::Undefined("no pairs to average".into()));
    }
    let n = per_pair.len() as f64;
    Alignment::new(
        per_pair.iter().map(|a| a.key_mean).sum::<f64>() / n,
        per_pair.iter().map(|a| a.other_mean).sum::<f64>() / n,
    )
}

/// A dated event for one pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyEvent {
    pub pair: EntityPair,
    pub month: YearMonth,
    pub description: String,
}

fn parse_pair(s: &str) -> Option<EntityPair> {
    if let Ok(p) = s.parse() {
        return Some(p);
    }
    let (a, b) = s.split_once('-')?;
    EntityPair::new(a.trim(), b.trim()).ok()
}

/// Reads `pair<TAB>YYYY-MM<TAB>description` lines. The pair is written
/// `A,B` or `A-B`; blank lines and `#` comments are skipped.
pub fn parse_key_events<R: BufRead>(reader: R, path: &Path) -> Result<Vec<KeyEvent>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (Some(pair), Some(month)) = (cols.next(), cols.next()) else {
            return Err(Error::parse(path, n + 1, "expected pair<TAB>YYYY-MM<TAB>description"));
        };
        let pair = parse_pair(pair.trim())
            .ok_or_else(|| Error::parse(path, n + 1, format!("bad pair `{pair}`")))?;
        let month: YearMonth = month
            .trim()
            .parse()
            .map_err(|e| Error::parse(path, n + 1, format!("{e}")))?;
        out.push(KeyEvent {
            pair,
            month,
            description: cols.next().unwrap_or("").trim().to_string(),
        });
    }
    Ok(out)
}

pub fn load_key_events(path: &Path) -> Result<Vec<KeyEvent>> {
    let f = std::fs::File::open(path)?;
    parse_key_events(std::io::BufReader::new(f), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn series(rows: &[&[f64]]) -> Vec<Option<Array1<f64>>> {
        rows.iter().map(|r| Some(Array1::from(r.to_vec()))).collect()
    }

    #[test]
    fn hand_example_window_one() {
        let m = series(&[&[0.2, 0.1, 0.1], &[0.3, 0.1, 0.1]]);
        let r = change_rate(&m, &[0, 1, 2], 1).unwrap();
        assert_eq!(r.delta[0], None);
        assert_abs_diff_eq!(r.delta[1].unwrap(), 0.30, epsilon = 1e-12);
    }

    #[test]
    fn constant_series_has_zero_change() {
        let m = series(&[&[0.5, 0.3, 0.2] as &[f64]; 10]);
        let r = change_rate(&m, &[0, 1, 2], 6).unwrap();
        assert!(r.delta[..6].iter().all(Option::is_none));
        assert!(r.delta[6..].iter().all(|d| *d == Some(0.0)));
    }

    #[test]
    fn window_uses_mean_of_preceding_months() {
        let m = series(&[&[0.1, 0.2], &[0.3, 0.2], &[0.4, 0.4]]);
        let r = change_rate(&m, &[0, 1], 2).unwrap();
        // prev = (0.2, 0.2); w = (0.5, 0.5)
        assert_abs_diff_eq!(r.delta[2].unwrap(), 0.5 * 1.0 + 0.5 * 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_months_are_skipped() {
        let mut m = series(&[&[0.2, 0.2], &[0.0, 0.0], &[0.4, 0.2]]);
        m[1] = None;
        let r = change_rate(&m, &[0, 1], 2).unwrap();
        assert_eq!(r.delta[1], None);
        // only month 0 is present in the window
        let w = (0.4 / 0.6, 0.2 / 0.6);
        assert_abs_diff_eq!(r.delta[2].unwrap(), w.0 * 1.0 + w.1 * 0.0, epsilon = 1e-12);
        let mut all_gap = series(&[&[0.2], &[0.3]]);
        all_gap[0] = None;
        assert_eq!(change_rate(&all_gap, &[0], 1).unwrap().delta[1], None);
    }

    #[test]
    fn zero_previous_weight_is_skipped_and_renormalised() {
        let m = series(&[&[0.0, 0.2], &[0.5, 0.3]]);
        let r = change_rate(&m, &[0, 1], 1).unwrap();
        assert_abs_diff_eq!(r.delta[1].unwrap(), 0.5, epsilon = 1e-12);
        let m = series(&[&[0.0], &[0.5]]);
        assert_eq!(change_rate(&m, &[0], 1).unwrap().delta[1], None);
    }

    #[test]
    fn window_must_fit() {
        let m = series(&[&[0.2] as &[f64]; 6]);
        assert!(matches!(change_rate(&m, &[0], 6), Err(Error::Config(_))));
        assert!(matches!(change_rate(&m, &[0], 0), Err(Error::Config(_))));
    }

    #[test]
    fn alignment_arithmetic() {
        let r = ChangeRateReport {
            window: 1,
            top: vec![0],
            delta: vec![Some(10.0), Some(5.0), Some(5.0), Some(5.0)],
        };
        let a = key_event_alignment(&r, &BTreeSet::from([0])).unwrap();
        assert_eq!((a.key_mean, a.other_mean), (10.0, 5.0));
        assert_abs_diff_eq!(a.relative_difference, 1.0, epsilon = 1e-15);
        assert_eq!(r.argmax(), Some(0));
        let all: BTreeSet<usize> = (0..4).collect();
        assert!(matches!(key_event_alignment(&r, &all), Err(Error::Undefined(_))));
    }

    #[test]
    fn constant_change_rate_aligns_to_zero() {
        let r = ChangeRateReport {
            window: 1,
            top: vec![0],
            delta: vec![None, Some(0.4), Some(0.4), Some(0.4)],
        };
        let a = key_event_alignment(&r, &BTreeSet::from([2])).unwrap();
        assert_eq!(a.relative_difference, 0.0);
    }

    #[test]
    fn macro_average_of_pairs() {
        let a = Alignment::new(4.0, 2.0).unwrap();
        let b = Alignment::new(2.0, 2.0).unwrap();
        let m = macro_alignment(&[a, b]).unwrap();
        assert_abs_diff_eq!(m.relative_difference, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn top_three_from_series() {
        let s = TrendSeries {
            pair: EntityPair::new("A", "B").unwrap(),
            components: vec!["0".into(), "1".into(), "2".into(), "3".into()],
            month_labels: vec![String::new(); 2],
            means: vec![Some(array![0.2, 0.0, 0.1, 0.1]), Some(array![0.3, 1.0, 0.1, 0.1])],
            counts: vec![1, 1],
            overall: array![0.25, 0.5, 0.1, 0.1],
        };
        let r = s.change_rate(1).unwrap();
        assert_eq!(r.top, vec![1, 0, 2]);
        // relation 1 has a zero previous value and is skipped
        let w = (0.3 / 0.4, 0.1 / 0.4);
        assert_abs_diff_eq!(r.delta[1].unwrap(), w.0 * 0.5 + w.1 * 0.0, epsilon = 1e-12);
    }

    #[test]
    fn key_event_file() {
        let text = "# pair\tmonth\tevent\nUS-China\t2018-03\tTariffs announced\nUS,Russia\t2016-12\tSanctions\n\n";
        let ev = parse_key_events(text.as_bytes(), Path::new("k.tsv")).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].pair, EntityPair::new("China", "US").unwrap());
        assert_eq!(ev[0].month.to_string(), "2018-03");
        assert_eq!(ev[1].description, "Sanctions");
        let err = parse_key_events("US-China\t2018/03\tx\n".as_bytes(), Path::new("k.tsv")).unwrap_err();
        assert!(err.to_string().starts_with("k.tsv:1:"), "{err}");
    }
}
