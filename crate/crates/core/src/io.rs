//! Edge-list and fitness file formats.
//!
//! Edge lists are UTF-8 text. Lines starting with `#` are comments,
//! `%directed true|false` sets orientation, and data rows are
//! `u<TAB>v[<TAB>weight]`. Any run of whitespace is accepted as a separator
//! when a row has no tab; `DatasetFormat::Csv` splits on commas instead.
//! Fitness files hold rows `node<TAB>m<TAB>r`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::graph::{describe_members, strongly_connected_components, FitnessGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    /// Tab- or whitespace-separated rows.
    #[default]
    EdgeList,
    /// Comma-separated rows.
    Csv,
}

/// A parsed edge list. Labels map to dense ids in order of first appearance,
/// or in numeric order when every label is a non-negative integer.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub directed: Option<bool>,
    pub labels: Vec<String>,
    pub rows: Vec<(usize, usize, Option<f64>)>,
}

impl EdgeList {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn is_weighted(&self) -> bool {
        self.rows.iter().any(|r| r.2.is_some())
    }
}

fn split_fields(line: &str, format: DatasetFormat) -> Vec<&str> {
    match format {
        DatasetFormat::Csv => line.split(',').map(str::trim).collect(),
        DatasetFormat::EdgeList if line.contains('\t') => line.split('\t').map(str::trim).collect(),
        DatasetFormat::EdgeList => line.split_whitespace().collect(),
    }
}

fn parse_float(s: &str, line: usize, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} '{s}'"),
    })
}

pub fn parse_edge_list(text: &str, format: DatasetFormat) -> Result<EdgeList> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    let mut directed = None;
    let mut intern = |label: &str, labels: &mut Vec<String>| -> usize {
        *ids.entry(label.to_string()).or_insert_with(|| {
            labels.push(label.to_string());
            labels.len() - 1
        })
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(directive) = line.strip_prefix('%') {
            let mut parts = directive.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("directed"), Some("true")) => directed = Some(true),
                (Some("directed"), Some("false")) => directed = Some(false),
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("unknown directive '{line}'"),
                    })
                }
            }
            continue;
        }
        let fields = split_fields(line, format);
        if fields.len() < 2 || fields.len() > 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 'u v [weight]', got '{line}'"),
            });
        }
        let u = intern(fields[0], &mut labels);
        let v = intern(fields[1], &mut labels);
        let w = match fields.get(2) {
            Some(s) => Some(parse_float(s, lineno, "weight")?),
            None => None,
        };
        rows.push((u, v, w));
    }

    // all-numeric labels keep their numeric order as ids
    let numeric: Option<Vec<u64>> = labels.iter().map(|l| l.parse::<u64>().ok()).collect();
    if let Some(values) = numeric {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&i| values[i]);
        let mut remap = vec![0; labels.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        labels = order.iter().map(|&i| labels[i].clone()).collect();
        for r in rows.iter_mut() {
            r.0 = remap[r.0];
            r.1 = remap[r.1];
        }
    }
    Ok(EdgeList {
        directed,
        labels,
        rows,
    })
}

/// Reads `node m r` rows keyed by label. Every label must be covered.
pub fn parse_fitness(text: &str, labels: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let n = labels.len();
    let mut mutant = vec![f64::NAN; n];
    let mut resident = vec![f64::NAN; n];
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line, DatasetFormat::EdgeList);
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 'node m r', got '{line}'"),
            });
        }
        let &u = index.get(fields[0]).ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("unknown node '{}'", fields[0]),
        })?;
        mutant[u] = parse_float(fields[1], lineno, "mutant fitness")?;
        resident[u] = parse_float(fields[2], lineno, "resident fitness")?;
    }
    if let Some(u) = (0..n).find(|&u| mutant[u].is_nan()) {
        return Err(Error::Parse {
            line: 0,
            message: format!("no fitness given for node '{}'", labels[u]),
        });
    }
    Ok((mutant, resident))
}

/// Serializes structure only. Undirected graphs list each edge once without
/// weight; directed graphs list every arc with its probability.
pub fn write_edge_list(g: &FitnessGraph) -> String {
    let mut out = String::new();
    writeln!(out, "%directed {}", g.is_directed()).unwrap();
    for (u, v, w) in g.arcs() {
        if g.is_directed() {
            writeln!(out, "{}\t{}\t{}", g.label(u), g.label(v), w).unwrap();
        } else if u < v {
            writeln!(out, "{}\t{}", g.label(u), g.label(v)).unwrap();
        }
    }
    out
}

pub fn write_fitness(g: &FitnessGraph) -> String {
    let mut out = String::new();
    for u in 0..g.n() {
        writeln!(
            out,
            "{}\t{}\t{}",
            g.label(u),
            g.mutant_fitness(u),
            g.resident_fitness(u)
        )
        .unwrap();
    }
    out
}

/// Strict loading: directed weights must already be probabilities.
/// Without a fitness table the graph is neutral with fitness 1.
pub fn load_graph(edge_text: &str, fitness_text: Option<&str>) -> Result<FitnessGraph> {
    let list = parse_edge_list(edge_text, DatasetFormat::EdgeList)?;
    let directed = list.directed.unwrap_or(false);
    if directed {
        if let Some(row) = list.rows.iter().position(|r| r.2.is_none()) {
            return Err(Error::Parse {
                line: 0,
                message: format!("directed arc #{} has no weight", row + 1),
            });
        }
    }
    let edges: Vec<(usize, usize, f64)> = list
        .rows
        .iter()
        .map(|&(u, v, w)| (u, v, w.unwrap_or(1.0)))
        .collect();
    let n = list.n();
    let (mutant, resident) = match fitness_text {
        Some(t) => parse_fitness(t, &list.labels)?,
        None => (vec![1.0; n], vec![1.0; n]),
    };
    FitnessGraph::build(&edges, directed, mutant, resident)?.with_labels(list.labels)
}

/// Ingests a real-world network. Raw weights are normalized per source node.
/// Unweighted undirected input becomes an undirected graph; weighted
/// undirected input keeps both arcs with their raw weights, which makes
/// the out-distributions non-uniform, so the result is flagged directed.
/// Directed input that is not strongly connected is reduced to its largest
/// strongly connected component. Fitness is neutral (all 1).
pub fn ingest_dataset(path: &Path, format: DatasetFormat) -> Result<FitnessGraph> {
    let text = std::fs::read_to_string(path)?;
    ingest_text(&text, format)
}

pub fn ingest_text(text: &str, format: DatasetFormat) -> Result<FitnessGraph> {
    let list = parse_edge_list(text, format)?;
    let directed = list.directed.unwrap_or(false);
    let n = list.n();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    // aggregate duplicate rows and drop self-loops
    let mut raw: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
    let weighted = list.is_weighted();
    for &(u, v, w) in &list.rows {
        if u == v {
            continue;
        }
        let w = w.unwrap_or(1.0);
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::BadWeight { u, v, weight: w });
        }
        if w == 0.0 {
            continue;
        }
        if directed || weighted {
            *raw[u].entry(v).or_insert(0.0) += w;
            if !directed {
                *raw[v].entry(u).or_insert(0.0) += w;
            }
        } else {
            raw[u].insert(v, 1.0);
            raw[v].insert(u, 1.0);
        }
    }

    let comps = strongly_connected_components(n, |u| {
        let mut s: Vec<usize> = raw[u].keys().copied().collect();
        s.sort_unstable();
        s.into_iter()
    });
    let keep: Vec<usize> = if comps.len() == 1 {
        (0..n).collect()
    } else {
        let largest = comps.iter().max_by_key(|c| c.len()).unwrap().clone();
        if !directed {
            return Err(Error::NotStronglyConnected {
                components: comps.len(),
                largest: largest.len(),
                largest_members: describe_members(&largest, &list.labels),
            });
        }
        warn!(
            "graph has {} strongly connected components; keeping the largest ({} of {} nodes)",
            comps.len(),
            largest.len(),
            n
        );
        largest
    };

    let mut new_id = vec![usize::MAX; n];
    for (i, &u) in keep.iter().enumerate() {
        new_id[u] = i;
    }
    let m = keep.len();
    let labels: Vec<String> = keep.iter().map(|&u| list.labels[u].clone()).collect();
    let undirected_out = !directed && !weighted;
    let mut edges = Vec::new();
    for &u in &keep {
        let mut row: Vec<(usize, f64)> = raw[u]
            .iter()
            .filter(|(v, _)| new_id[**v] != usize::MAX)
            .map(|(&v, &w)| (new_id[v], w))
            .collect();
        row.sort_by_key(|e| e.0);
        if undirected_out {
            edges.extend(row.into_iter().filter(|&(v, _)| new_id[u] < v).map(|(v, _)| (new_id[u], v, 1.0)));
            continue;
        }
        let total: f64 = row.iter().map(|e| e.1).sum();
        let exact = (total - 1.0).abs() <= 1e-12;
        for (v, w) in row {
            edges.push((new_id[u], v, if exact { w } else { w / total }));
        }
    }
    FitnessGraph::build(&edges, !undirected_out, vec![1.0; m], vec![1.0; m])?.with_labels(labels)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_directives_comments_and_labels() {
        let text = "# header\n%directed true\na\tb\t0.25\na\tc\t0.75\nb\ta\t1\nc\ta\t1\n";
        let l = parse_edge_list(text, DatasetFormat::EdgeList).unwrap();
        assert_eq!(l.directed, Some(true));
        assert_eq!(l.labels, vec!["a", "b", "c"]);
        assert_eq!(l.rows[0], (0, 1, Some(0.25)));
        let g = load_graph(text, None).unwrap();
        assert_eq!(g.weight(0, 2), 0.75);
        assert_eq!(g.label(2), "c");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_edge_list("%directed true\na b c d\n", DatasetFormat::EdgeList).unwrap_err();
        assert_eq!(err, Error::Parse { line: 2, message: "expected 'u v [weight]', got 'a b c d'".into() });
        let err = parse_edge_list("a\tb\tx\n", DatasetFormat::EdgeList).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_edge_list("%weighted yes\n", DatasetFormat::EdgeList).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn fitness_file_by_label() {
        let g = load_graph("x y\ny z\nz x\n", Some("z\t2\t1\nx\t1.5\t1\ny\t1\t1\n")).unwrap();
        assert_eq!(g.mutant(), &[1.5, 1.0, 2.0]);
        let err = load_graph("x y\n", Some("x\t1\t1\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn ingest_unweighted_undirected_is_uniform() {
        let g = ingest_text("0 1\n1 2\n2 0\n0 3\n", DatasetFormat::EdgeList).unwrap();
        assert!(!g.is_directed());
        assert_eq!(g.weight(0, 1), 1.0 / 3.0);
        assert_eq!(g.weight(3, 0), 1.0);
    }

    #[test]
    fn ingest_weighted_normalizes_per_source() {
        let g = ingest_text("a,b,2\nb,c,1\na,c,6\n", DatasetFormat::Csv).unwrap();
        assert!(g.is_directed());
        assert_eq!(g.weight(0, 1), 0.25);
        assert_eq!(g.weight(0, 2), 0.75);
        assert_eq!(g.weight(1, 0), 2.0 / 3.0);
        for u in 0..g.n() {
            let s: f64 = g.out_edges(u).map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ingest_condenses_directed_and_rejects_disconnected_undirected() {
        let g = ingest_text("%directed true\na b 1\nb a 1\nb c 1\nc d 1\nd c 1\nd e 1\ne c 1\n", DatasetFormat::EdgeList)
            .unwrap();
        assert_eq!(g.labels(), &["c", "d", "e"]);
        let err = ingest_text("a b\nc d\ne d\n", DatasetFormat::EdgeList).unwrap_err();
        match err {
            Error::NotStronglyConnected { largest, largest_members, .. } => {
                assert_eq!(largest, 3);
                assert_eq!(largest_members, "c,d,e");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    fn arb_directed() -> impl Strategy<Value = FitnessGraph> {
        (2usize..7, proptest::collection::vec(0.01f64..10.0, 49)).prop_map(|(n, raw)| {
            // complete digraph with arbitrary positive weights
            let mut edges = Vec::new();
            for u in 0..n {
                let row: Vec<(usize, f64)> = (0..n).filter(|&v| v != u).map(|v| (v, raw[u * 7 + v])).collect();
                let s: f64 = row.iter().map(|e| e.1).sum();
                edges.extend(row.into_iter().map(|(v, w)| (u, v, w / s)));
            }
            let m = (0..n).map(|u| 1.0 + raw[u] / 7.0).collect();
            FitnessGraph::build(&edges, true, m, vec![1.0; n]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn serialize_then_load_is_bit_exact(g in arb_directed()) {
            let text = write_edge_list(&g);
            let fit = write_fitness(&g);
            let back = load_graph(&text, Some(&fit)).unwrap();
            let a: Vec<_> = g.arcs().map(|(u, v, w)| (u, v, w.to_bits())).collect();
            let b: Vec<_> = back.arcs().map(|(u, v, w)| (u, v, w.to_bits())).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(g.mutant(), back.mutant());
            // ingestion of the same file must also keep the bits
            let ing = ingest_text(&text, DatasetFormat::EdgeList).unwrap();
            let c: Vec<_> = ing.arcs().map(|(u, v, w)| (u, v, w.to_bits())).collect();
            prop_assert_eq!(&c, &back.arcs().map(|(u, v, w)| (u, v, w.to_bits())).collect::<Vec<_>>());
        }
    }

    #[test]
    fn undirected_round_trip() {
        let g = ingest_text("0 1\n1 2\n2 3\n3 0\n0 2\n", DatasetFormat::EdgeList).unwrap();
        let back = load_graph(&write_edge_list(&g), None).unwrap();
        assert_eq!(g, back);
        for (u, _, w) in back.arcs() {
            assert_eq!(w, 1.0 / back.degree(u) as f64);
        }
    }
}
