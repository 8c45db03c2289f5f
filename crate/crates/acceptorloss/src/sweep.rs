//! Parameter sweeps: up to three axes over dotted config keys, expanded in
//! row-major order (last axis fastest) and run on a worker pool.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::commands::{run, Command};
use crate::config::{AxisSpec, ConfigTree, RangeSpec};
use crate::error::CliError;
use crate::record::{RecordError, ResultRecord, SweepPoint};

pub const MAX_AXES: usize = 3;

fn linspace(r: &RangeSpec) -> Vec<f64> {
    match r.num {
        0 => Vec::new(),
        1 => vec![r.start],
        n => (0..n)
            .map(|k| r.start + (r.stop - r.start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Values of one axis.
pub fn axis_values(axis: &AxisSpec) -> Result<Vec<f64>, CliError> {
    let bad = |m: &str| CliError::Config(format!("sweep axis `{}`: {m}", axis.key));
    let values = match (&axis.values, &axis.linspace, &axis.logspace) {
        (Some(v), None, None) => v.clone(),
        (None, Some(r), None) => linspace(r),
        (None, None, Some(r)) => {
            if !(r.start > 0.0 && r.stop > 0.0) {
                return Err(bad("logspace bounds must be positive"));
            }
            let logs = RangeSpec {
                start: r.start.log10(),
                stop: r.stop.log10(),
                num: r.num,
            };
            linspace(&logs).into_iter().map(|x| 10f64.powf(x)).collect()
        }
        _ => return Err(bad("set exactly one of values, linspace, logspace")),
    };
    if values.is_empty() {
        return Err(bad("no values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    Ok(values)
}

/// Cartesian product of the axes, last axis fastest.
pub fn expand(axes: &[AxisSpec]) -> Result<Vec<Vec<(String, f64)>>, CliError> {
    if axes.is_empty() || axes.len() > MAX_AXES {
        return Err(CliError::Config(format!(
            "a sweep needs 1 to {MAX_AXES} axes, got {}",
            axes.len()
        )));
    }
    let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in axes {
        let values = axis_values(axis)?;
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn run_point(
    tree: &ConfigTree,
    command: Command,
    index: usize,
    point: &[(String, f64)],
) -> ResultRecord {
    let coordinates: BTreeMap<String, f64> = point.iter().cloned().collect();
    let mut patched = tree.clone();
    let resolved = point
        .iter()
        .try_for_each(|(k, v)| patched.set(k, toml::Value::Float(*v)))
        .and_then(|_| patched.resolve());
    let mut record = match &resolved {
        Ok(cfg) => ResultRecord::new(command.name(), cfg),
        Err(_) => ResultRecord::new(command.name(), &Default::default()),
    };
    record.sweep_point = Some(SweepPoint { index, coordinates });
    match resolved.and_then(|cfg| run(command, &cfg, 1)) {
        Ok(out) => {
            record.outputs = out.outputs;
            record.warnings = out.warnings;
        }
        Err(e) => record.error = Some(RecordError::from(&e)),
    }
    record
}

/// Runs every sweep point. Failing points are kept as records with an
/// `error` field; the order of the result matches [`expand`].
pub fn run_sweep(tree: &ConfigTree, workers: usize) -> Result<Vec<ResultRecord>, CliError> {
    let cfg = tree.resolve()?;
    let sweep = cfg.sweep.ok_or_else(|| crate::config::missing("sweep"))?;
    let command: Command = sweep.command.parse()?;
    let points = expand(&sweep.axes)?;
    let slots: Vec<Mutex<Option<ResultRecord>>> = points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, points.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(point) = points.get(i) else { break };
                let record = run_point(tree, command, i, point);
                *slots[i].lock().expect("slot lock") = Some(record);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every point ran"))
        .collect())
}

/// Flat table: index, coordinates, then every numeric output seen.
pub fn write_sweep_csv(path: &Path, records: &[ResultRecord]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let coords: Vec<String> = records
        .first()
        .and_then(|r| r.sweep_point.as_ref())
        .map(|p| p.coordinates.keys().cloned().collect())
        .unwrap_or_default();
    let mut outputs: Vec<String> = records
        .iter()
        .flat_map(|r| {
            r.outputs
                .iter()
                .filter(|(_, v)| v.as_f64().is_some())
                .map(|(k, _)| k.clone())
        })
        .collect();
    outputs.sort();
    outputs.dedup();
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["index".to_string()];
    header.extend(coords.iter().cloned());
    header.extend(outputs.iter().cloned());
    header.push("error".into());
    w.write_record(&header).map_err(io)?;
    for r in records {
        let point = r.sweep_point.as_ref();
        let mut row = vec![point.map_or(String::new(), |p| p.index.to_string())];
        row.extend(coords.iter().map(|c| {
            point
                .and_then(|p| p.coordinates.get(c))
                .map_or(String::new(), |v| v.to_string())
        }));
        row.extend(outputs.iter().map(|k| {
            r.outputs
                .get(k)
                .and_then(|v| v.as_f64())
                .map_or(String::new(), |v| v.to_string())
        }));
        row.push(
            r.error
                .as_ref()
                .map_or(String::new(), |e| e.message.clone()),
        );
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(key: &str, values: &[f64]) -> AxisSpec {
        AxisSpec {
            key: key.into(),
            values: Some(values.to_vec()),
            linspace: None,
            logspace: None,
        }
    }

    #[test]
    fn row_major_order() {
        let p = expand(&[axis("a", &[1.0, 2.0]), axis("b", &[10.0, 20.0, 30.0])]).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p[1], vec![("a".into(), 1.0), ("b".into(), 20.0)]);
        assert_eq!(p[3], vec![("a".into(), 2.0), ("b".into(), 10.0)]);
    }

    #[test]
    fn spaced_axes() {
        let lin = AxisSpec {
            linspace: Some(RangeSpec {
                start: 0.0,
                stop: 1.0,
                num: 5,
            }),
            ..axis("x", &[])
        };
        let lin = AxisSpec {
            values: None,
            ..lin
        };
        assert_eq!(axis_values(&lin).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let log = AxisSpec {
            values: None,
            logspace: Some(RangeSpec {
                start: 1.0,
                stop: 1e3,
                num: 4,
            }),
            ..axis("x", &[])
        };
        let v = axis_values(&log).unwrap();
        assert!((v[2] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(expand(&[]).is_err());
        let four: Vec<_> = (0..4).map(|k| axis(&format!("k{k}"), &[1.0])).collect();
        assert!(expand(&four).is_err());
        let both = AxisSpec {
            linspace: Some(RangeSpec {
                start: 0.0,
                stop: 1.0,
                num: 2,
            }),
            ..axis("x", &[1.0])
        };
        assert!(axis_values(&both).is_err());
    }
}
