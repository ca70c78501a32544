//! Figure assembly for the five plot kinds. Stream plots show per-window
//! mean loss against the window's start index, one series per sweep
//! assignment, averaged over seeds; the scaling curve shows max regret
//! against window length on log-log axes with a slope-1/2 guide. Y axes are
//! logarithmic whenever every plotted value is positive.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::report::{read_runs_csv, read_windows_csv, RunRow, WindowRow};
use crate::runner::{RunOutcome, RunRecord};
use crate::svg::{render_svg, Figure, Scale, Series};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    RateSweep,
    TSweep,
    OrderSweep,
    OptimizerCompare,
    ScalingCurve,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::RateSweep,
        PlotKind::TSweep,
        PlotKind::OrderSweep,
        PlotKind::OptimizerCompare,
        PlotKind::ScalingCurve,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::RateSweep => "rate_sweep",
            PlotKind::TSweep => "t_sweep",
            PlotKind::OrderSweep => "order_sweep",
            PlotKind::OptimizerCompare => "optimizer_compare",
            PlotKind::ScalingCurve => "scaling_curve",
        }
    }

    /// Config field this kind expects the sweep to vary.
    fn swept_field(self) -> &'static str {
        match self {
            PlotKind::RateSweep => "optimizer.eta1",
            PlotKind::TSweep | PlotKind::ScalingCurve => "windows.t",
            PlotKind::OrderSweep => "source.order",
            PlotKind::OptimizerCompare => "optimizer.kind",
        }
    }
}

impl std::fmt::Display for PlotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
                Error::Invalid(format!("unknown plot kind {s:?}; expected one of {names:?}"))
            })
    }
}

/// One run's plottable slice: summary row plus its per-window table.
#[derive(Debug, Clone)]
pub struct RunData {
    pub row: RunRow,
    pub windows: Vec<WindowRow>,
}

impl RunData {
    fn from_record(r: &RunRecord) -> Self {
        let windows = r
            .report
            .records
            .iter()
            .map(|w| WindowRow {
                offset: w.offset,
                t: w.t_window,
                online_loss: w.online_loss,
                offline_loss: w.offline_loss,
                regret: w.regret,
                oracle_iters: w.oracle_iters,
                oracle_residual: w.oracle_residual,
                converged: w.converged,
            })
            .collect();
        Self { row: RunRow::from_record(r), windows }
    }
}

/// Renders finished runs straight from memory, writing `<kind>.svg`.
pub fn emit_plot(outcomes: &[RunOutcome], kind: PlotKind, dir: &Path) -> Result<PathBuf> {
    let data: Vec<RunData> = outcomes
        .iter()
        .filter_map(|o| match o {
            RunOutcome::Record(r) => Some(RunData::from_record(r)),
            RunOutcome::Failure(_) => None,
        })
        .collect();
    write_figure(&data, kind, dir)
}

/// Renders from a directory previously written by `emit_csv`.
pub fn emit_plot_from_dir(dir: &Path, kind: PlotKind) -> Result<PathBuf> {
    let rows = read_runs_csv(&dir.join("runs.csv"))?;
    let mut data = Vec::with_capacity(rows.len());
    for row in rows {
        let windows = read_windows_csv(&dir.join(format!("windows_{}.csv", row.config_hash)))?;
        data.push(RunData { row, windows });
    }
    write_figure(&data, kind, dir)
}

fn write_figure(data: &[RunData], kind: PlotKind, dir: &Path) -> Result<PathBuf> {
    let figure = figure_for(kind, data)?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{kind}.svg"));
    std::fs::write(&path, render_svg(&figure)?)?;
    Ok(path)
}

/// Value assigned to `field` in a `k=v;k=v` sweep label, if present.
fn assignment(label: &str, field: &str) -> Option<String> {
    label
        .split(';')
        .filter_map(|part| part.split_once('='))
        .find(|(k, _)| *k == field)
        .map(|(_, v)| v.to_string())
}

/// Sweep label with the `field` assignment removed.
fn strip_assignment(label: &str, field: &str) -> String {
    label
        .split(';')
        .filter(|part| part.split_once('=').is_none_or(|(k, _)| k != field))
        .collect::<Vec<_>>()
        .join(";")
}

/// Groups runs by sweep label, preserving first-appearance order.
fn group_by_label(data: &[RunData]) -> Vec<(String, Vec<&RunData>)> {
    let mut groups: Vec<(String, Vec<&RunData>)> = Vec::new();
    for run in data {
        match groups.iter_mut().find(|(l, _)| *l == run.row.sweep) {
            Some((_, members)) => members.push(run),
            None => groups.push((run.row.sweep.clone(), vec![run])),
        }
    }
    groups
}

/// A multi-series figure must actually vary the kind's field; a single
/// series (no sweep, or one sweep point) is fine for any kind.
fn validate_kind(kind: PlotKind, groups: &[(String, Vec<&RunData>)]) -> Result<()> {
    if groups.len() < 2 {
        return Ok(());
    }
    let field = kind.swept_field();
    let values: BTreeSet<String> =
        groups.iter().filter_map(|(l, _)| assignment(l, field)).collect();
    if values.len() < 2 {
        return Err(Error::Invalid(format!(
            "plot kind {kind} expects a sweep over {field}; the sweep labels do not vary it"
        )));
    }
    Ok(())
}

/// Fallback series label when there was no sweep.
fn describe(row: &RunRow) -> String {
    format!("{} eta1={} T={}", row.optimizer, row.eta1, row.t_window)
}

fn mean_points(acc: BTreeMap<usize, (f64, usize)>) -> Vec<(f64, f64)> {
    acc.into_iter().map(|(x, (sum, n))| (x as f64, sum / n as f64)).collect()
}

fn y_scale_for(series: &[Series]) -> Scale {
    let all_positive = series.iter().flat_map(|s| &s.points).all(|&(_, y)| y > 0.0);
    if all_positive { Scale::Log10 } else { Scale::Linear }
}

fn figure_for(kind: PlotKind, data: &[RunData]) -> Result<Figure> {
    if data.is_empty() {
        return Err(Error::Invalid("no finished runs to plot".into()));
    }
    let groups = group_by_label(data);
    validate_kind(kind, &groups)?;
    let seeds: BTreeSet<u64> = data.iter().map(|d| d.row.seed).collect();

    if kind == PlotKind::ScalingCurve {
        // One series per sweep label modulo the T assignment; each point is
        // the seed-mean max regret at one window length.
        let mut by_series: BTreeMap<String, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
        for run in data {
            let stripped = strip_assignment(&run.row.sweep, "windows.t");
            let label = if stripped.is_empty() { run.row.optimizer.clone() } else { stripped };
            let cell = by_series.entry(label).or_default().entry(run.row.t_window).or_insert((
                0.0, 0,
            ));
            cell.0 += run.row.max_regret;
            cell.1 += 1;
        }
        let series: Vec<Series> = by_series
            .into_iter()
            .map(|(label, acc)| Series { label, points: mean_points(acc) })
            .collect();
        let x_positive = series.iter().flat_map(|s| &s.points).all(|&(x, _)| x > 0.0);
        return Ok(Figure {
            title: "max rolling-window regret vs window length".into(),
            x_label: "window length T".into(),
            y_label: "max rolling-window regret".into(),
            x_scale: if x_positive { Scale::Log10 } else { Scale::Linear },
            y_scale: y_scale_for(&series),
            slope_half_guide: true,
            note: Some(format!(
                "y: regret of the worst window, mean over {} seed(s)",
                seeds.len()
            )),
            series,
        });
    }

    let mut series = Vec::with_capacity(groups.len());
    for (label, runs) in &groups {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for run in runs {
            for w in &run.windows {
                let cell = acc.entry(w.offset).or_insert((0.0, 0));
                cell.0 += w.online_loss / (w.t + 1) as f64;
                cell.1 += 1;
            }
        }
        let label =
            if label.is_empty() { describe(&runs[0].row) } else { label.clone() };
        series.push(Series { label, points: mean_points(acc) });
    }
    let title = match kind {
        PlotKind::RateSweep => "window loss by learning rate",
        PlotKind::TSweep => "window loss by window length",
        PlotKind::OrderSweep => "window loss by stream order",
        PlotKind::OptimizerCompare => "window loss by optimizer",
        PlotKind::ScalingCurve => unreachable!("handled above"),
    };
    Ok(Figure {
        title: title.into(),
        x_label: "window start (sample index)".into(),
        y_label: "mean per-sample window loss".into(),
        x_scale: Scale::Linear,
        y_scale: y_scale_for(&series),
        slope_half_guide: false,
        note: Some(format!(
            "window loss = online loss / (T+1), mean over {} seed(s)",
            seeds.len()
        )),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(offset: usize, t: usize, online_loss: f64) -> WindowRow {
        WindowRow {
            offset,
            t,
            online_loss,
            offline_loss: 0.0,
            regret: online_loss,
            oracle_iters: 0,
            oracle_residual: 0.0,
            converged: true,
        }
    }

    fn run(sweep: &str, seed: u64, t: usize, max_regret: f64, windows: Vec<WindowRow>) -> RunData {
        RunData {
            row: RunRow {
                config_hash: format!("h{sweep}{seed}"),
                seed,
                sweep: sweep.into(),
                source: "convex(dim=4 k=1 n=20 skew=0 noise=0)".into(),
                task: "ridge(h=1)".into(),
                optimizer: "ogd".into(),
                schedule: "window_scaled".into(),
                eta1: 0.5,
                t_window: t,
                samples: 20,
                max_regret,
                argmax_offset: 0,
                first_window_loss: 1.0,
                final_window_loss: 0.5,
                d_inf: 1.0,
                g_inf: 1.0,
                alpha: None,
                g2_inf: None,
                mu: None,
                min_cosine: None,
            },
            windows,
        }
    }

    #[test]
    fn rate_sweep_makes_one_series_per_sweep_label() {
        let data = vec![
            run("optimizer.eta1=0.5", 1, 4, 1.0, vec![window(0, 4, 5.0), window(4, 4, 2.5)]),
            run("optimizer.eta1=0.1", 1, 4, 2.0, vec![window(0, 4, 10.0), window(4, 4, 5.0)]),
        ];
        let fig = figure_for(PlotKind::RateSweep, &data).unwrap();
        let labels: Vec<&str> = fig.series.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["optimizer.eta1=0.5", "optimizer.eta1=0.1"]);
        assert_eq!(fig.series[0].points, vec![(0.0, 1.0), (4.0, 0.5)], "loss divided by T+1");
    }

    #[test]
    fn kind_must_match_what_the_sweep_varies() {
        let data = vec![
            run("windows.t=4", 1, 4, 1.0, vec![window(0, 4, 5.0)]),
            run("windows.t=8", 1, 8, 2.0, vec![window(0, 8, 9.0)]),
        ];
        let err = figure_for(PlotKind::RateSweep, &data).unwrap_err();
        assert!(err.to_string().contains("optimizer.eta1"), "got: {err}");
        assert!(figure_for(PlotKind::TSweep, &data).is_ok());
    }

    #[test]
    fn single_unswept_run_is_accepted_by_every_kind() {
        let data = vec![run("", 1, 4, 1.0, vec![window(0, 4, 5.0), window(4, 4, 2.5)])];
        for kind in PlotKind::ALL {
            let fig = figure_for(kind, &data).unwrap();
            assert_eq!(fig.series.len(), 1, "{kind}");
        }
        let fig = figure_for(PlotKind::RateSweep, &data).unwrap();
        assert_eq!(fig.series[0].label, "ogd eta1=0.5 T=4", "fallback label describes the run");
    }

    #[test]
    fn seeds_with_the_same_label_are_averaged_pointwise() {
        let data = vec![
            run("", 1, 4, 1.0, vec![window(0, 4, 5.0)]),
            run("", 2, 4, 3.0, vec![window(0, 4, 15.0)]),
        ];
        let fig = figure_for(PlotKind::OptimizerCompare, &data).unwrap();
        assert_eq!(fig.series.len(), 1);
        assert_eq!(fig.series[0].points, vec![(0.0, 2.0)], "(1.0 + 3.0) / 2");
        assert_eq!(fig.note.as_deref(), Some("window loss = online loss / (T+1), mean over 2 seed(s)"));
    }

    #[test]
    fn scaling_curve_collapses_the_t_assignment_into_x() {
        let data = vec![
            run("optimizer.kind=ogd;windows.t=4", 1, 4, 2.0, vec![window(0, 4, 1.0)]),
            run("optimizer.kind=ogd;windows.t=16", 1, 16, 4.0, vec![window(0, 16, 1.0)]),
            run("optimizer.kind=convg_adam;windows.t=4", 1, 4, 3.0, vec![window(0, 4, 1.0)]),
            run("optimizer.kind=convg_adam;windows.t=16", 1, 16, 5.0, vec![window(0, 16, 1.0)]),
        ];
        let fig = figure_for(PlotKind::ScalingCurve, &data).unwrap();
        assert_eq!(fig.series.len(), 2, "one series per optimizer, not per (optimizer, T)");
        assert!(fig.slope_half_guide);
        assert_eq!(fig.x_scale, Scale::Log10);
        assert_eq!(fig.y_scale, Scale::Log10);
        let ogd = fig.series.iter().find(|s| s.label == "optimizer.kind=ogd").unwrap();
        assert_eq!(ogd.points, vec![(4.0, 2.0), (16.0, 4.0)], "x = T, y = max regret");
    }

    #[test]
    fn nonpositive_losses_fall_back_to_a_linear_y_axis() {
        let data = vec![run("", 1, 4, 1.0, vec![window(0, 4, 0.0), window(4, 4, 2.5)])];
        let fig = figure_for(PlotKind::RateSweep, &data).unwrap();
        assert_eq!(fig.y_scale, Scale::Linear);
    }

    #[test]
    fn plot_kind_names_round_trip_and_reject_unknowns() {
        for kind in PlotKind::ALL {
            assert_eq!(kind.as_str().parse::<PlotKind>().unwrap(), kind);
        }
        let err = "histogram".parse::<PlotKind>().unwrap_err();
        assert!(err.to_string().contains("scaling_curve"), "error lists the valid kinds");
    }

    #[test]
    fn emit_plot_writes_the_kind_named_file() {
        let dir = tempfile::tempdir().unwrap();
        let data = vec![run("", 1, 4, 1.0, vec![window(0, 4, 5.0), window(4, 4, 2.5)])];
        let fig = figure_for(PlotKind::TSweep, &data).unwrap();
        let path = dir.path().join("t_sweep.svg");
        std::fs::write(&path, render_svg(&fig).unwrap()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg "));
        assert!(text.contains("window start (sample index)"), "x axis labeled");
    }
}
