//! Dataset container and its CSV form.
//!
//! ```text
//! # scenario=2 seed=1 n=100
//! x1,x2,y1
//! 0.52,0.13,1.9
//! ```
//!
//! The metadata line is optional on input. Response columns may be absent (prediction
//! inputs). Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    /// `n x p`; `p` may be 0 when only covariates are known.
    pub y: Matrix,
    pub scenario: Option<u8>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::shape("Dataset::new", format!("{} response rows", x.rows()), y.rows()));
        }
        Ok(Self {
            x,
            y,
            scenario: None,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.y.cols()
    }
}

pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut out = out;
    let meta = |e| Error::io("<dataset>", e);
    if let (Some(id), Some(seed)) = (data.scenario, data.seed) {
        writeln!(out, "# scenario={id} seed={seed} n={}", data.len()).map_err(meta)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (1..=data.input_dim())
        .map(|j| format!("x{j}"))
        .chain((1..=data.output_dim()).map(|j| format!("y{j}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let rec: Vec<String> = data
            .x
            .row(i)
            .iter()
            .chain(data.y.row(i))
            .map(|v| v.to_string())
            .collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(meta)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| Error::io("<dataset>", e))?;
    let (scenario, seed, body): (Option<u8>, Option<u64>, Box<dyn Read>) =
        if let Some(meta) = first.trim_end().strip_prefix('#') {
            let (scenario, seed) = parse_meta(meta)?;
            (scenario, seed, Box::new(reader))
        } else {
            (None, None, Box::new(std::io::Cursor::new(first).chain(reader)))
        };

    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body);
    let header = r.headers().map_err(csv_err)?.clone();
    let mut d = 0;
    let mut p = 0;
    for (k, name) in header.iter().enumerate() {
        let name = name.trim();
        let expected_x = format!("x{}", d + 1);
        let expected_y = format!("y{}", p + 1);
        if p == 0 && name == expected_x {
            d += 1;
        } else if name == expected_y {
            p += 1;
        } else {
            return Err(Error::parse(
                format!("header[{k}]"),
                format!("expected {expected_x:?} or {expected_y:?}, got {name:?}"),
            ));
        }
    }
    if d == 0 {
        return Err(Error::parse("header", "no covariate columns"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != d + p {
            return Err(Error::parse(
                format!("row {}", i + 1),
                format!("expected {} fields, got {}", d + p, rec.len()),
            ));
        }
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(format!("row {} column {}", i + 1, &header[k]), format!("not a number: {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(format!("row {} column {}", i + 1, &header[k]), "non-finite value"));
            }
            if k < d {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let n = xs.len() / d;
    let x = Matrix::new(n, d, xs).expect("row lengths checked");
    let y = Matrix::new(n, p, ys).expect("row lengths checked");
    Ok(Dataset { x, y, scenario, seed })
}

fn parse_meta(meta: &str) -> Result<(Option<u8>, Option<u64>)> {
    let mut scenario = None;
    let mut seed = None;
    for tok in meta.split_whitespace() {
        let Some((k, v)) = tok.split_once('=') else {
            continue;
        };
        match k {
            "scenario" => {
                scenario = Some(v.parse().map_err(|_| Error::parse("metadata.scenario", v))?)
            }
            "seed" => seed = Some(v.parse().map_err(|_| Error::parse("metadata.seed", v))?),
            _ => {}
        }
    }
    Ok((scenario, seed))
}

fn csv_err(e: csv::Error) -> Error {
    let path = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "csv".into());
    Error::parse(path, e)
}

impl Dataset {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        write_csv(self, std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        read_csv(f)
    }
}
