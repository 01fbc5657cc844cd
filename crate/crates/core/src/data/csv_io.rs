//! Wide (panel) and long (event record) CSV formats.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::history::{ContinuousHistory, CovariateStep, HistorySet};
use super::panel::{Cohort, IntervalPanel};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

const MISSING: &str = "NA";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

struct WideLayout {
    id: usize,
    a: usize,
    arms: Option<(usize, usize)>,
    l0: Vec<usize>,
    l0_names: Vec<String>,
    l_names: Vec<String>,
    /// Per k: (y, d, c, l columns).
    per_k: Vec<(usize, usize, usize, Vec<usize>)>,
}

fn column(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Number of intervals declared by the `y_<k>` columns of a wide header.
pub fn wide_k_max(header: &csv::StringRecord) -> Result<usize> {
    let mut k = 0;
    while header.iter().any(|h| h == format!("y_{}", k + 1)) {
        k += 1;
    }
    column(header, "y_0")?;
    if k == 0 {
        return Err(Error::MissingColumn("y_1".into()));
    }
    Ok(k)
}

fn wide_layout(header: &csv::StringRecord, k_max: usize) -> Result<WideLayout> {
    let arms = match (column(header, "a_y"), column(header, "a_d")) {
        (Ok(x), Ok(y)) => Some((x, y)),
        (Err(_), Err(_)) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let mut l0 = Vec::new();
    let mut l0_names = Vec::new();
    let mut l_names = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if let Some(name) = h.strip_prefix("l0_") {
            l0.push(i);
            l0_names.push(name.to_string());
        } else if let Some(name) = h.strip_prefix("l_0_") {
            l_names.push(name.to_string());
        }
    }
    let mut per_k = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let l = l_names
            .iter()
            .map(|n| column(header, &format!("l_{k}_{n}")))
            .collect::<Result<Vec<_>>>()?;
        per_k.push((
            column(header, &format!("y_{k}"))?,
            column(header, &format!("d_{k}"))?,
            column(header, &format!("c_{k}"))?,
            l,
        ));
    }
    Ok(WideLayout {
        id: column(header, "id")?,
        a: column(header, "a")?,
        arms,
        l0,
        l0_names,
        l_names,
        per_k,
    })
}

fn cell(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("").trim()
}

fn parse_int<T: std::str::FromStr>(row: usize, name: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::MalformedRow {
        row,
        column: name.to_string(),
        reason: format!("`{s}` is not a valid integer"),
    })
}

fn parse_opt<T: std::str::FromStr>(row: usize, name: &str, s: &str) -> Result<Option<T>> {
    if s.is_empty() || s == MISSING {
        Ok(None)
    } else {
        parse_int(row, name, s).map(Some)
    }
}

/// Reads a wide CSV. `grid.k_max` must match the header.
pub fn read_wide<R: Read>(reader: R, grid: TimeGrid) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let k_max = wide_k_max(&header)?;
    if k_max != grid.k_max {
        return Err(Error::InvalidGrid(format!(
            "file declares {k_max} intervals, grid has {}",
            grid.k_max
        )));
    }
    let lay = wide_layout(&header, k_max)?;
    let names: Vec<&str> = header.iter().collect();
    let mut panels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let get = |i: usize| cell(&rec, i);
        let a: u8 = parse_int(row, "a", get(lay.a))?;
        let arms = match lay.arms {
            Some((x, y)) => Some((parse_int(row, "a_y", get(x))?, parse_int(row, "a_d", get(y))?)),
            None => None,
        };
        let l0 = lay
            .l0
            .iter()
            .map(|&i| parse_int(row, names[i], get(i)))
            .collect::<Result<Vec<i64>>>()?;
        let c = lay
            .per_k
            .iter()
            .map(|(_, _, ci, _)| parse_int::<u8>(row, names[*ci], get(*ci)))
            .collect::<Result<Vec<u8>>>()?;
        let censor = c.iter().position(|&v| v == 1).unwrap_or(c.len());
        let n = k_max + 1;
        let (mut y, mut d, mut l) = (vec![None; n], vec![None; n], vec![None; n]);
        for k in 0..censor {
            let (yi, di, _, li) = &lay.per_k[k];
            y[k] = parse_opt(row, names[*yi], get(*yi))?;
            d[k] = parse_opt(row, names[*di], get(*di))?;
            let mut vals = Vec::with_capacity(li.len());
            let mut complete = true;
            for &i in li {
                match parse_opt::<i64>(row, names[i], get(i))? {
                    Some(v) => vals.push(v),
                    None => complete = false,
                }
            }
            l[k] = complete.then_some(vals);
        }
        panels.push(IntervalPanel {
            id: get(lay.id).to_string(),
            a,
            arms,
            l0,
            l,
            y,
            d,
            c,
        });
    }
    Cohort::new(grid, lay.l0_names, lay.l_names, panels)
}

pub fn load_panel(path: impl AsRef<Path>, grid: TimeGrid) -> Result<Cohort> {
    read_wide(open(path.as_ref())?, grid)
}

/// Reads only the header of a wide CSV to find `k_max`.
pub fn infer_wide_k_max(path: impl AsRef<Path>) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path.as_ref())?);
    wide_k_max(rdr.headers()?)
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| MISSING.to_string(), |x| x.to_string())
}

pub fn write_wide<W: Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let four = cohort.is_four_arm();
    let mut header = vec!["id".to_string(), "a".to_string()];
    if four {
        header.push("a_y".into());
        header.push("a_d".into());
    }
    header.extend(cohort.l0_names.iter().map(|n| format!("l0_{n}")));
    for k in 0..=cohort.grid.k_max {
        header.push(format!("y_{k}"));
        header.push(format!("d_{k}"));
        header.push(format!("c_{k}"));
        header.extend(cohort.l_names.iter().map(|n| format!("l_{k}_{n}")));
    }
    w.write_record(&header)?;
    for p in &cohort.panels {
        let mut rec = vec![p.id.clone(), p.a.to_string()];
        if four {
            rec.push(p.a_y().to_string());
            rec.push(p.a_d().to_string());
        }
        rec.extend(p.l0.iter().map(|v| v.to_string()));
        for k in 0..=cohort.grid.k_max {
            rec.push(opt_str(&p.y[k]));
            rec.push(opt_str(&p.d[k]));
            rec.push(p.c[k].to_string());
            for j in 0..cohort.l_names.len() {
                rec.push(opt_str(&p.l[k].as_ref().map(|v| v[j])));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

fn parse_mark(row: usize, mark: &str) -> Result<Vec<(String, i64)>> {
    mark.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::MalformedRow {
                row,
                column: "mark".into(),
                reason: format!("`{kv}` is not name=value"),
            })?;
            Ok((k.trim().to_string(), parse_int(row, "mark", v.trim())?))
        })
        .collect()
}

/// Reads a long CSV onto the follow-up window of `grid`.
pub fn read_long<R: Read>(reader: R, grid: TimeGrid) -> Result<HistorySet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let id_c = column(&header, "id")?;
    let a_c = column(&header, "a")?;
    let arms_c = match (column(&header, "a_y"), column(&header, "a_d")) {
        (Ok(x), Ok(y)) => Some((x, y)),
        _ => None,
    };
    let stop_c = column(&header, "stop")?;
    column(&header, "start")?;
    let event_c = column(&header, "event")?;
    let mark_c = column(&header, "mark")?;
    let l0_cols: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("l0_").map(|n| (i, n.to_string())))
        .collect();
    let mut l_names: Option<Vec<String>> = None;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, ContinuousHistory> = HashMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let id = cell(&rec, id_c).to_string();
        let a: u8 = parse_int(row, "a", cell(&rec, a_c))?;
        let arms = match arms_c {
            Some((x, y)) => Some((
                parse_int(row, "a_y", cell(&rec, x))?,
                parse_int(row, "a_d", cell(&rec, y))?,
            )),
            None => None,
        };
        let l0 = l0_cols
            .iter()
            .map(|(i, n)| parse_int(row, &format!("l0_{n}"), cell(&rec, *i)))
            .collect::<Result<Vec<i64>>>()?;
        let h = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            ContinuousHistory {
                id: id.clone(),
                a,
                arms,
                l0: l0.clone(),
                recurrent_times: vec![],
                death_time: None,
                censor_time: None,
                covariate_steps: vec![],
            }
        });
        if h.a != a || h.arms != arms || h.l0 != l0 {
            return Err(Error::MalformedRow {
                row,
                column: "a".into(),
                reason: "baseline fields differ between records of one id".into(),
            });
        }
        let t: f64 = cell(&rec, stop_c).parse().map_err(|_| Error::MalformedRow {
            row,
            column: "stop".into(),
            reason: "not a number".into(),
        })?;
        match cell(&rec, event_c) {
            "recurrent" => h.recurrent_times.push(t),
            "death" => h.death_time = Some(t),
            "censor" => h.censor_time = Some(t),
            "covariate" => {
                let kv = parse_mark(row, cell(&rec, mark_c))?;
                let names: Vec<String> = kv.iter().map(|(k, _)| k.clone()).collect();
                match &l_names {
                    None => l_names = Some(names.clone()),
                    Some(existing) if *existing != names => {
                        return Err(Error::MalformedRow {
                            row,
                            column: "mark".into(),
                            reason: "covariate names differ from earlier records".into(),
                        })
                    }
                    _ => {}
                }
                if !kv.is_empty() {
                    h.covariate_steps.push(CovariateStep {
                        time: t,
                        values: kv.into_iter().map(|(_, v)| v).collect(),
                    });
                }
            }
            other => {
                return Err(Error::MalformedRow {
                    row,
                    column: "event".into(),
                    reason: format!("unknown event kind `{other}`"),
                })
            }
        }
    }
    let set = HistorySet {
        origin: grid.origin,
        end: grid.end(),
        grid: Some(grid),
        l0_names: l0_cols.into_iter().map(|(_, n)| n).collect(),
        l_names: l_names.unwrap_or_default(),
        l_d: None,
        histories: order.into_iter().map(|id| by_id.remove(&id).unwrap()).collect(),
    };
    set.validate()?;
    Ok(set)
}

pub fn load_long(path: impl AsRef<Path>, grid: TimeGrid) -> Result<HistorySet> {
    read_long(open(path.as_ref())?, grid)
}

pub fn write_long<W: Write>(set: &HistorySet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let four = set.histories.iter().any(|h| h.arms.is_some());
    let mut header = vec!["id".to_string(), "a".to_string()];
    if four {
        header.push("a_y".into());
        header.push("a_d".into());
    }
    header.extend(set.l0_names.iter().map(|n| format!("l0_{n}")));
    header.extend(["start", "stop", "event", "mark"].map(String::from));
    w.write_record(&header)?;
    for h in &set.histories {
        let mut base = vec![h.id.clone(), h.a.to_string()];
        if four {
            base.push(h.a_y().to_string());
            base.push(h.a_d().to_string());
        }
        base.extend(h.l0.iter().map(|v| v.to_string()));
        // (time, order within a tie, kind, mark)
        let mut events: Vec<(f64, u8, &str, String)> = Vec::new();
        if h.covariate_steps.is_empty() {
            events.push((set.origin, 0, "covariate", String::new()));
        }
        for s in &h.covariate_steps {
            let mark = set
                .l_names
                .iter()
                .zip(&s.values)
                .map(|(n, v)| format!("{n}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            events.push((s.time, 3, "covariate", mark));
        }
        for &t in &h.recurrent_times {
            events.push((t, 2, "recurrent", String::new()));
        }
        if let Some(t) = h.death_time {
            events.push((t, 1, "death", String::new()));
        }
        if let Some(t) = h.censor_time {
            events.push((t, 0, "censor", String::new()));
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut start = set.origin;
        for (t, _, kind, mark) in events {
            let mut rec = base.clone();
            rec.push(start.to_string());
            rec.push(t.to_string());
            rec.push(kind.to_string());
            rec.push(mark);
            w.write_record(&rec)?;
            start = t;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}
