//! CSV and gnuplot-style data files, and the single writer that puts a run
//! on disk once everything has been computed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use genflow_core::association::{HierarchyReport, LimitingFlowReport};
use genflow_core::flow::{FlowTable, Trajectory};
use genflow_core::{AssociationVerdict, ConditionReport, Space, VectorFieldNet};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::run::Outcome;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn coord_names(space: Space) -> Vec<String> {
    match space {
        Space::Circle => vec!["alpha".into()],
        Space::Torus2 => vec!["alpha".into(), "beta".into()],
        Space::Euclidean { dim } => (1..=dim).map(|k| format!("x{k}")).collect(),
    }
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("ascii output")
}

/// epsilon, t, starting coordinates, coordinates (angles wrapped).
pub fn trajectories_csv(space: Space, trajectories: &[Trajectory]) -> String {
    let names = coord_names(space);
    let mut header = vec!["epsilon".to_string(), "t".to_string()];
    header.extend(names.iter().map(|n| format!("{n}0")));
    header.extend(names.iter().cloned());
    let rows = trajectories.iter().flat_map(|tr| {
        tr.times.iter().zip(&tr.states).map(move |(t, x)| {
            let mut r = vec![num(tr.eps), num(*t)];
            r.extend(tr.initial.iter().map(|v| num(*v)));
            r.extend(space.canonical(x).into_iter().map(num));
            r
        })
    });
    csv_text(&header, rows)
}

/// epsilon, t, node coordinates, Φ^ε(t, node) (angles wrapped).
pub fn flowtable_csv(table: &FlowTable) -> String {
    let names = coord_names(table.space);
    let mut header = vec!["epsilon".to_string(), "t".to_string()];
    header.extend(names.iter().map(|n| format!("p_{n}")));
    header.extend(names.iter().map(|n| format!("phi_{n}")));
    let (ne, nt, np) = (table.eps.len(), table.t_grid.len(), table.p_grid.len());
    let rows = (0..ne).flat_map(move |e| {
        (0..nt).flat_map(move |ti| {
            (0..np).map(move |pi| {
                let mut r = vec![num(table.eps[e]), num(table.t_grid[ti])];
                r.extend(table.p_grid[pi].iter().map(|v| num(*v)));
                r.extend(table.space.canonical(table.value(e, ti, pi)).into_iter().map(num));
                r
            })
        })
    });
    csv_text(&header, rows)
}

/// Whitespace-separated blocks, two blank lines apart, so gnuplot's
/// `index` picks them out.
struct Dat {
    text: String,
    blocks: usize,
}

impl Dat {
    fn new(title: &str, columns: &[String]) -> Self {
        let mut text = format!("# {title}\n# columns: {}\n", columns.join(" "));
        text.push('\n');
        Self { text, blocks: 0 }
    }

    fn block(&mut self, label: &str) {
        if self.blocks > 0 {
            self.text.push_str("\n\n");
        }
        self.blocks += 1;
        let _ = writeln!(self.text, "# {label}");
    }

    fn row(&mut self, values: &[f64]) {
        let line: Vec<String> = values.iter().map(|v| num(*v)).collect();
        let _ = writeln!(self.text, "{}", line.join(" "));
    }

    fn finish(self, name: &str) -> Artifact {
        Artifact { name: name.into(), contents: self.text }
    }
}

fn trajectories_dat(space: Space, trajectories: &[Trajectory]) -> Artifact {
    let mut cols = vec!["t".to_string()];
    cols.extend(coord_names(space));
    let mut d = Dat::new("trajectories, one block per (start, eps)", &cols);
    for tr in trajectories {
        d.block(&format!("start {:?} eps {}", tr.initial, num(tr.eps)));
        for (t, x) in tr.times.iter().zip(&tr.states) {
            let mut r = vec![*t];
            r.extend(space.canonical(x));
            d.row(&r);
        }
    }
    d.finish("trajectories.dat")
}

fn limit_dat(cfg: &RunConfig, table: &FlowTable) -> Artifact {
    let names = coord_names(table.space);
    let closed = cfg.closed_limit();
    let mut cols: Vec<String> = names.iter().map(|n| format!("p_{n}")).collect();
    cols.extend(names.iter().map(|n| format!("psi_{n}")));
    if closed.is_some() {
        cols.extend(names.iter().map(|n| format!("closed_{n}")));
    }
    cols.push("cauchy_last".into());
    let mut d = Dat::new("extracted limit Psi = Phi at the smallest eps, one block per t", &cols);
    for (ti, t) in table.t_grid.iter().enumerate() {
        d.block(&format!("t {}", num(*t)));
        for (pi, p) in table.p_grid.iter().enumerate() {
            let mut r = p.clone();
            r.extend(table.space.canonical(table.psi(ti, pi)));
            if let Some(c) = &closed {
                r.extend(table.space.canonical(&c.eval(*t, p)));
            }
            r.push(table.cauchy(ti, pi).last().copied().unwrap_or(0.0));
            d.row(&r);
        }
    }
    d.finish("limit.dat")
}

fn residuals_dat(space: Space, table: &FlowTable, r: &LimitingFlowReport) -> Option<Artifact> {
    let mut cols: Vec<String> = coord_names(space).iter().map(|n| format!("p_{n}")).collect();
    cols.extend(["residual".to_string(), "off_singular".to_string()]);
    let mut d = Dat::new("flow-property residual d(Psi(s+t, p), Psi(s, Psi(t, p))), one block per (s, t)", &cols);
    for res in &r.residuals {
        let per = res.per_node.as_ref()?;
        d.block(&format!("s {} t {}", num(res.s), num(res.t)));
        for (k, p) in table.p_grid.iter().enumerate() {
            let mut row = p.clone();
            row.push(per[k]);
            let off = res.off_singular.as_ref().map(|o| o[k]).unwrap_or(false);
            row.push(if off { 1.0 } else { 0.0 });
            d.row(&row);
        }
    }
    Some(d.finish("residuals.dat"))
}

fn sup_series(v: &AssociationVerdict) -> Vec<(f64, f64)> {
    let mut eps: Vec<f64> = v.evidence.iter().flat_map(|e| e.series.iter().map(|p| p.0)).collect();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    eps.into_iter()
        .map(|e| {
            let m = v
                .evidence
                .iter()
                .flat_map(|ev| ev.series.iter().filter(|p| p.0 == e).map(|p| p.1))
                .fold(0.0, f64::max);
            (e, m)
        })
        .collect()
}

fn notions_dat(r: &LimitingFlowReport) -> Artifact {
    let cols = ["eps".to_string(), "max_over_evidence".to_string()];
    let mut d = Dat::new("association series, one block per (t, notion)", &cols);
    for n in &r.notions {
        for v in [&n.zero, &n.pw, &n.fast] {
            d.block(&format!("t {} {} {}", num(n.t), v.notion.label(), v.verdict.label()));
            for (e, s) in sup_series(v) {
                d.row(&[e, s]);
            }
        }
    }
    d.finish("notions.dat")
}

fn association_dat(v: &AssociationVerdict) -> Artifact {
    let mut d = Dat::new("association evidence, one block per series", &["eps".to_string(), "value".to_string()]);
    for ev in &v.evidence {
        d.block(&format!("{} {}", ev.label, ev.verdict.label()));
        for (e, s) in &ev.series {
            d.row(&[*e, *s]);
        }
    }
    d.finish("association.dat")
}

fn conditions_dat(reports: &[ConditionReport]) -> Artifact {
    let mut d = Dat::new("condition sup series, one block per condition", &["eps".to_string(), "sup".to_string()]);
    for c in reports {
        let name = c.condition.label();
        d.block(&format!("{name} {} {}", c.verdict.label(), c.growth.class.label()));
        for (e, s) in &c.growth.evidence {
            d.row(&[*e, *s]);
        }
    }
    d.finish("conditions.dat")
}

fn hierarchy_dat(h: &HierarchyReport) -> Artifact {
    let mut d = Dat::new("hierarchy witnesses, one block per (net, notion, series)", &["eps".to_string(), "value".to_string()]);
    for net in [&h.sine, &h.comb] {
        for v in &net.verdicts {
            for ev in &v.evidence {
                d.block(&format!("{} {} {}", net.label, v.notion.label(), ev.label));
                for (e, s) in &ev.series {
                    d.row(&[*e, *s]);
                }
            }
        }
    }
    d.finish("hierarchy.dat")
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn artifacts(
    cfg: &RunConfig,
    field: Option<&VectorFieldNet>,
    trajectories: &[Trajectory],
    table: Option<&FlowTable>,
    limiting: &Option<LimitingFlowReport>,
    conditions: &[ConditionReport],
    hierarchy: &Option<HierarchyReport>,
    association: &Option<AssociationVerdict>,
) -> Vec<Artifact> {
    let mut out = Vec::new();
    if let (Some(f), false) = (field, trajectories.is_empty()) {
        out.push(Artifact { name: "trajectories.csv".into(), contents: trajectories_csv(f.space(), trajectories) });
        out.push(trajectories_dat(f.space(), trajectories));
    }
    if let Some(t) = table {
        out.push(Artifact { name: "flowtable.csv".into(), contents: flowtable_csv(t) });
        out.push(limit_dat(cfg, t));
        if let Some(r) = limiting {
            out.extend(residuals_dat(t.space, t, r));
            out.push(notions_dat(r));
        }
    }
    if !conditions.is_empty() {
        out.push(conditions_dat(conditions));
    }
    if let Some(h) = hierarchy {
        out.push(hierarchy_dat(h));
    }
    if let Some(v) = association {
        out.push(association_dat(v));
    }
    out
}

/// Writes every artifact, then report.json, into `dir`.
pub fn write_outcome(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for a in &outcome.artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1e-8, 0.05, std::f64::consts::PI, -1.2, 1e20, 2.5e-300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x, "{}", num(x));
        }
        assert_eq!(num(1e-8), "1e-8");
        assert_eq!(num(0.05), "0.05");
    }

    #[test]
    fn dat_blocks_are_separated_by_two_blank_lines() {
        let mut d = Dat::new("x", &["a".into()]);
        d.block("one");
        d.row(&[1.0]);
        d.block("two");
        d.row(&[2.0]);
        let a = d.finish("x.dat");
        assert!(a.contents.contains("1\n\n\n# two\n2\n"));
    }
}
