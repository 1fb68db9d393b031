//! Plain-text model files.
//!
//! ```text
//! svq-model 1
//! dim 2
//! codes 4
//! n 10
//! layout ring 4
//! neighbourhood_radius 1
//! leakage gaussian 1 0.8
//! weights
//! <codes lines of dim values>
//! biases
//! <one line of codes values>
//! recon
//! <codes lines of dim values>
//! ```
//!
//! `leakage` is `identity`, `gaussian <radius> <sigma>`, or `table`
//! followed by one line per source code of `dst:prob` pairs (0-based).
//! Numbers use the shortest decimal form that parses back to the same
//! value, so loading a saved model reproduces it bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SvqError};
use crate::leakage::LeakageKernel;
use crate::matrix::Matrix;
use crate::model::{Codebook, ResponseModel, Svq};
use crate::topology::{Layout, Topology};

const MAGIC: &str = "svq-model 1";

fn push_row(out: &mut String, row: &[f64]) {
    let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

fn leakage_line(svq: &Svq) -> String {
    let k = &svq.leakage;
    if k.is_identity() {
        return "identity".into();
    }
    if let Ok(g) = LeakageKernel::gaussian(svq.layout(), k.radius(), k.sigma()) {
        if &g == k {
            return format!("gaussian {} {:?}", k.radius(), k.sigma());
        }
    }
    let mut s = String::from("table");
    for src in 0..k.num_codes() {
        s.push('\n');
        let pairs: Vec<String> = k.column(src).iter().map(|(d, p)| format!("{d}:{p:?}")).collect();
        s.push_str(&pairs.join(" "));
    }
    s
}

fn layout_line(layout: Layout) -> String {
    match layout {
        Layout::Ring(m) => format!("ring {m}"),
        Layout::Line(m) => format!("line {m}"),
        Layout::Grid { rows, cols, wrap } => format!("grid {rows} {cols} {}", if wrap { "wrap" } else { "nowrap" }),
    }
}

pub fn to_text(svq: &Svq) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "dim {}", svq.dim());
    let _ = writeln!(out, "codes {}", svq.num_codes());
    let _ = writeln!(out, "n {}", svq.n);
    let _ = writeln!(out, "layout {}", layout_line(svq.layout()));
    let _ = writeln!(out, "neighbourhood_radius {}", svq.topology.radius());
    let _ = writeln!(out, "leakage {}", leakage_line(svq));
    out.push_str("weights\n");
    for row in svq.response.weights().iter_rows() {
        push_row(&mut out, row);
    }
    out.push_str("biases\n");
    push_row(&mut out, svq.response.biases());
    out.push_str("recon\n");
    for row in svq.codebook.matrix().iter_rows() {
        push_row(&mut out, row);
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.line = i + 1;
                    let t = l.trim();
                    if !t.is_empty() {
                        return Ok(t);
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> SvqError {
        SvqError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ => Err(self.err(format!("expected `{key} ...`, found {l:?}"))),
        }
    }

    fn keyed_number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        self.number(v, key)
    }

    fn number<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("invalid {what} {s:?}")))
    }

    fn row(&mut self, len: usize) -> Result<Vec<f64>> {
        let l = self.next()?;
        let v = l
            .split_whitespace()
            .map(|t| self.number::<f64>(t, "number"))
            .collect::<Result<Vec<f64>>>()?;
        if v.len() != len {
            return Err(self.err(format!("expected {len} values, found {}", v.len())));
        }
        Ok(v)
    }

    fn section(&mut self, name: &str) -> Result<()> {
        let l = self.next()?;
        if l == name {
            Ok(())
        } else {
            Err(self.err(format!("expected section `{name}`, found {l:?}")))
        }
    }
}

fn parse_layout(lines: &Lines, s: &str) -> Result<Layout> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts.as_slice() {
        ["ring", m] => Ok(Layout::Ring(lines.number(m, "code count")?)),
        ["line", m] => Ok(Layout::Line(lines.number(m, "code count")?)),
        ["grid", r, c, w] => Ok(Layout::Grid {
            rows: lines.number(r, "row count")?,
            cols: lines.number(c, "column count")?,
            wrap: match *w {
                "wrap" => true,
                "nowrap" => false,
                _ => return Err(lines.err(format!("invalid wrap flag {w:?}"))),
            },
        }),
        _ => Err(lines.err(format!("invalid layout {s:?}"))),
    }
}

pub fn from_text(text: &str) -> Result<Svq> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let magic = lines.next()?;
    if magic != MAGIC {
        return Err(lines.err(format!("not a model file (header {magic:?})")));
    }
    let dim: usize = lines.keyed_number("dim")?;
    let codes: usize = lines.keyed_number("codes")?;
    let n: usize = lines.keyed_number("n")?;
    let layout_text = lines.keyed("layout")?;
    let layout = parse_layout(&lines, layout_text)?;
    if layout.num_codes() != codes {
        return Err(lines.err(format!("layout has {} codes, header says {codes}", layout.num_codes())));
    }
    let radius: usize = lines.keyed_number("neighbourhood_radius")?;
    let leak_text = lines.keyed("leakage")?;
    let leak_parts: Vec<&str> = leak_text.split_whitespace().collect();
    let leakage = match leak_parts.as_slice() {
        ["identity"] => LeakageKernel::identity(codes),
        ["gaussian", r, s] => {
            let r: usize = lines.number(r, "leakage radius")?;
            let s: f64 = lines.number(s, "leakage sigma")?;
            LeakageKernel::gaussian(layout, r, s).map_err(|e| lines.err(e.to_string()))?
        }
        ["table"] => {
            let mut columns = Vec::with_capacity(codes);
            for _ in 0..codes {
                let l = lines.next()?;
                let col = l
                    .split_whitespace()
                    .map(|pair| {
                        let (d, p) = pair
                            .split_once(':')
                            .ok_or_else(|| lines.err(format!("invalid leak entry {pair:?}")))?;
                        Ok((lines.number::<usize>(d, "leak destination")?, lines.number::<f64>(p, "leak probability")?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                columns.push(col);
            }
            LeakageKernel::from_columns(columns).map_err(|e| lines.err(e.to_string()))?
        }
        _ => return Err(lines.err(format!("invalid leakage {leak_text:?}"))),
    };
    lines.section("weights")?;
    let mut w = Vec::with_capacity(codes * dim);
    for _ in 0..codes {
        w.extend(lines.row(dim)?);
    }
    lines.section("biases")?;
    let biases = lines.row(codes)?;
    lines.section("recon")?;
    let mut r = Vec::with_capacity(codes * dim);
    for _ in 0..codes {
        r.extend(lines.row(dim)?);
    }
    let topology = Topology::new(layout, radius)?;
    Svq::new(
        Codebook::new(Matrix::from_vec(codes, dim, r))?,
        ResponseModel::new(Matrix::from_vec(codes, dim, w), biases)?,
        topology,
        leakage,
        n,
    )
}

pub fn save(svq: &Svq, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_text(svq))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Svq> {
    from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::stream_rng;
    use proptest::prelude::*;

    fn model(layout: Layout, radius: usize, leak: LeakageKernel, seed: u64) -> Svq {
        let topo = Topology::new(layout, radius).unwrap();
        Svq::init(3, topo, leak, 7, 1.3, &mut stream_rng(seed, 0)).unwrap()
    }

    #[test]
    fn round_trip_every_leakage_kind() {
        let grid = Layout::Grid { rows: 3, cols: 4, wrap: true };
        let cases = vec![
            model(Layout::Ring(5), 1, LeakageKernel::identity(5), 1),
            model(grid, 1, LeakageKernel::gaussian(grid, 1, 0.7).unwrap(), 2),
            model(
                Layout::Line(2),
                0,
                LeakageKernel::from_columns(vec![vec![(0, 0.25), (1, 0.75)], vec![(1, 1.0)]]).unwrap(),
                3,
            ),
        ];
        for svq in cases {
            let text = to_text(&svq);
            let back = from_text(&text).unwrap();
            assert_eq!(back, svq);
            assert_eq!(to_text(&back), text);
        }
    }

    #[test]
    fn header_is_self_describing() {
        let svq = model(Layout::Ring(4), 1, LeakageKernel::gaussian(Layout::Ring(4), 1, 0.5).unwrap(), 4);
        let text = to_text(&svq);
        let head: Vec<&str> = text.lines().take(7).collect();
        assert_eq!(
            head,
            vec![
                "svq-model 1",
                "dim 3",
                "codes 4",
                "n 7",
                "layout ring 4",
                "neighbourhood_radius 1",
                "leakage gaussian 1 0.5"
            ]
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let svq = model(Layout::Ring(2), 0, LeakageKernel::identity(2), 5);
        let text = to_text(&svq).replace("n 7", "n seven");
        match from_text(&text) {
            Err(SvqError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        let truncated: String = to_text(&svq).lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(matches!(from_text(&truncated), Err(SvqError::Parse { .. })));
    }

    #[test]
    fn file_round_trip() {
        let svq = model(Layout::Ring(3), 1, LeakageKernel::identity(3), 6);
        let dir = std::env::temp_dir().join(format!("svq-persist-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.txt");
        save(&svq, &path).unwrap();
        assert_eq!(load(&path).unwrap(), svq);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn arbitrary_values_round_trip(values in proptest::collection::vec(-1e300f64..1e300, 2 * 3 * 2 + 2)) {
            let mut svq = model(Layout::Ring(2), 1, LeakageKernel::identity(2), 7);
            svq.response.weights_mut().as_mut_slice().copy_from_slice(&values[..6]);
            svq.codebook.matrix_mut().as_mut_slice().copy_from_slice(&values[6..12]);
            svq.response.biases_mut().copy_from_slice(&values[12..]);
            let back = from_text(&to_text(&svq)).unwrap();
            prop_assert_eq!(back, svq);
        }
    }
}
