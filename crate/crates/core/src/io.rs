//! File formats: grid functions and weights (JSON header line followed by
//! little-endian `f64` or CSV values), weight sidecars, shifts (JSON header
//! line followed by binary term blocks) and schema-tagged JSON reports.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, DyadicGrid, GridFunction};
use crate::shifts::generic::local_haars;
use crate::shifts::{GenericHaarShift, Profile, ScaleFamily, ShiftKind, ShiftOperator, SimpleHaarShift};
use crate::weights::{a2_characteristic, Weight, WeightProvenance};

/// Version tag embedded in every file this crate writes.
pub const SCHEMA: &str = "dyadlab/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Binary,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GridHeader {
    schema: String,
    d: u32,
    #[serde(rename = "N")]
    n: u32,
    encoding: Encoding,
}

fn check_schema(found: &str) -> Result<()> {
    if found == SCHEMA {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "unsupported schema {found:?}, expected {SCHEMA:?}"
        )))
    }
}

fn read_header_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(Error::Format("empty input".into()));
    }
    Ok(line)
}

pub fn write_grid_function<W: Write>(mut out: W, f: &GridFunction, encoding: Encoding) -> Result<()> {
    let grid = f.grid();
    let header = GridHeader {
        schema: SCHEMA.into(),
        d: grid.dim(),
        n: grid.depth(),
        encoding,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    match encoding {
        Encoding::Binary => {
            for v in f.values() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Encoding::Csv => {
            writeln!(out, "value")?;
            for v in f.values() {
                writeln!(out, "{v}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_grid_function<R: BufRead>(mut r: R) -> Result<GridFunction> {
    let line = read_header_line(&mut r)?;
    let header: GridHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("bad grid header: {e}")))?;
    check_schema(&header.schema)?;
    let grid = DyadicGrid::new(header.d, header.n)?;
    let count = grid.cell_count();
    let values = match header.encoding {
        Encoding::Binary => {
            let mut bytes = Vec::new();
            r.read_to_end(&mut bytes)?;
            if bytes.len() != 8 * count {
                return Err(Error::Format(format!(
                    "expected {} bytes of cell data, found {}",
                    8 * count,
                    bytes.len()
                )));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect()
        }
        Encoding::Csv => {
            let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
            let mut values = Vec::with_capacity(count);
            for rec in rdr.records() {
                let rec = rec?;
                let field = rec.get(0).ok_or_else(|| Error::Format("empty CSV row".into()))?;
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad value {field:?}: {e}")))?,
                );
            }
            values
        }
    };
    if values.len() != count {
        return Err(Error::Format(format!(
            "expected {count} values, found {}",
            values.len()
        )));
    }
    GridFunction::new(grid, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSidecar {
    pub schema: String,
    pub family: String,
    pub parameters: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    pub realized_a2: f64,
}

impl WeightSidecar {
    pub fn of(w: &Weight) -> Self {
        let p = w.provenance();
        WeightSidecar {
            schema: SCHEMA.into(),
            family: p.family.clone(),
            parameters: p.parameters.clone(),
            seed: p.seed,
            realized_a2: a2_characteristic(w),
        }
    }
}

/// Cell data in grid-function format plus the sidecar JSON.
pub fn write_weight<W: Write, S: Write>(data: W, sidecar: S, w: &Weight, encoding: Encoding) -> Result<()> {
    write_grid_function(data, &w.to_grid_function(), encoding)?;
    write_json(sidecar, &WeightSidecar::of(w))
}

pub fn read_weight<R: BufRead>(data: R, sidecar: Option<WeightSidecar>) -> Result<Weight> {
    let f = read_grid_function(data)?;
    let provenance = match sidecar {
        Some(s) => {
            check_schema(&s.schema)?;
            WeightProvenance {
                family: s.family,
                parameters: s.parameters,
                seed: s.seed,
            }
        }
        None => WeightProvenance {
            family: "file".into(),
            ..Default::default()
        },
    };
    Weight::new(f, provenance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftForm {
    Simple,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftHeader {
    pub schema: String,
    pub form: ShiftForm,
    /// [`ShiftKind::name`]; a random kind takes its seed from `seed`.
    pub kind: String,
    pub family: ScaleFamily,
    pub tau: u32,
    pub d: u32,
    #[serde(rename = "N")]
    pub n: u32,
    pub seed: Option<u64>,
    pub terms: usize,
    /// `f64` values per term block after the 12-byte cube address.
    pub block_values: usize,
}

fn write_cube<W: Write>(out: &mut W, q: DyadicCube) -> Result<()> {
    for v in [q.level, q.index[0], q.index[1]] {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_header<W: Write>(out: &mut W, h: &ShiftHeader) -> Result<()> {
    serde_json::to_writer(&mut *out, h)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_simple_shift<W: Write>(mut out: W, t: &SimpleHaarShift) -> Result<()> {
    let grid = t.grid();
    let sub = t.subcell_count();
    write_header(
        &mut out,
        &ShiftHeader {
            schema: SCHEMA.into(),
            form: ShiftForm::Simple,
            kind: t.kind().name().into(),
            family: t.family(),
            tau: t.tau(),
            d: grid.dim(),
            n: grid.depth(),
            seed: t.kind().seed(),
            terms: t.len(),
            block_values: 2 * sub,
        },
    )?;
    for (q, p) in t.terms() {
        write_cube(&mut out, q)?;
        write_f64s(&mut out, &p.g)?;
        write_f64s(&mut out, &p.gamma)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_generic_shift<W: Write>(mut out: W, t: &GenericHaarShift) -> Result<()> {
    let grid = t.grid();
    let m = local_haars(grid.dim(), t.tau()).len();
    write_header(
        &mut out,
        &ShiftHeader {
            schema: SCHEMA.into(),
            form: ShiftForm::Generic,
            kind: ShiftKind::Custom.name().into(),
            family: t.family(),
            tau: t.tau(),
            d: grid.dim(),
            n: grid.depth(),
            seed: t.seed(),
            terms: t.len(),
            block_values: m * m,
        },
    )?;
    for (i, q) in t.cubes().iter().enumerate() {
        write_cube(&mut out, *q)?;
        write_f64s(&mut out, t.coefficients(i))?;
    }
    out.flush()?;
    Ok(())
}

/// A deserialized shift of either form.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredShift {
    Simple(SimpleHaarShift),
    Generic(GenericHaarShift),
}

impl StoredShift {
    pub fn as_operator(&self) -> &dyn ShiftOperator {
        match self {
            StoredShift::Simple(t) => t,
            StoredShift::Generic(t) => t,
        }
    }
}

fn parse_kind(name: &str, seed: Option<u64>) -> Result<ShiftKind> {
    Ok(match (name, seed) {
        ("zero", _) => ShiftKind::Zero,
        ("petermichl", _) => ShiftKind::Petermichl,
        ("martingale", _) => ShiftKind::Martingale,
        ("random", Some(seed)) => ShiftKind::Random { seed },
        ("custom", _) => ShiftKind::Custom,
        _ => return Err(Error::Format(format!("unknown shift kind {name:?} (seed {seed:?})"))),
    })
}

fn read_blocks<R: Read>(mut r: R, terms: usize, values: usize) -> Result<Vec<(DyadicCube, Vec<f64>)>> {
    let stride = 12 + 8 * values;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != terms * stride {
        return Err(Error::Format(format!(
            "expected {} bytes of term blocks, found {}",
            terms * stride,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(stride)
        .map(|b| {
            let word = |i: usize| u32::from_le_bytes(b[4 * i..4 * i + 4].try_into().expect("4 bytes"));
            let q = DyadicCube {
                level: word(0),
                index: [word(1), word(2)],
            };
            let v = b[12..]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            (q, v)
        })
        .collect())
}

pub fn read_shift<R: BufRead>(mut r: R) -> Result<StoredShift> {
    let line = read_header_line(&mut r)?;
    let h: ShiftHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("bad shift header: {e}")))?;
    check_schema(&h.schema)?;
    let grid = DyadicGrid::new(h.d, h.n)?;
    if h.tau == 0 || h.tau > grid.depth() {
        return Err(Error::Format(format!("bad shift index {}", h.tau)));
    }
    let blocks = read_blocks(r, h.terms, h.block_values)?;
    for (q, _) in &blocks {
        if !grid.is_valid(*q) {
            return Err(Error::Format(format!("cube {q} is not on {grid}")));
        }
    }
    match h.form {
        ShiftForm::Simple => {
            let sub = 1usize << (h.tau * h.d);
            if h.block_values != 2 * sub {
                return Err(Error::Format("simple shift blocks must hold g and gamma".into()));
            }
            let terms = blocks
                .into_iter()
                .map(|(q, mut v)| {
                    let gamma = v.split_off(sub);
                    (q, Profile { g: v, gamma })
                })
                .collect();
            Ok(StoredShift::Simple(SimpleHaarShift::new(
                grid,
                h.tau,
                parse_kind(&h.kind, h.seed)?,
                h.family,
                terms,
            )?))
        }
        ShiftForm::Generic => Ok(StoredShift::Generic(GenericHaarShift::new(
            grid, h.tau, h.family, h.seed, blocks,
        )?)),
    }
}

/// `{"schema": SCHEMA, ...value}` for struct-like values, otherwise
/// `{"schema": SCHEMA, "value": value}`.
pub fn with_schema<T: Serialize + ?Sized>(value: &T) -> Result<serde_json::Value> {
    let v = serde_json::to_value(value)?;
    let mut map = serde_json::Map::new();
    map.insert("schema".into(), SCHEMA.into());
    match v {
        serde_json::Value::Object(o) => map.extend(o),
        other => {
            map.insert("value".into(), other);
        }
    }
    Ok(serde_json::Value::Object(map))
}

/// Pretty JSON with the schema tag and a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &with_schema(value)?)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
