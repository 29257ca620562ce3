//! File formats: the flat binary layout for grids, fields, and kernel
//! tables (header `dim`, `N`, `L` as little-endian 64-bit values, payload
//! row-major 64-bit floats), JSON for small cases, the set DSL, and atomic
//! measure files.

use anyhow::{anyhow, bail, Context, Result};
use captool_core::{Atom, AtomicMeasure, Field, Grid, GridSet, KernelTable};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

/// Write a field in the flat binary layout.
pub fn write_field_binary(path: &Path, field: &Field) -> Result<()> {
    let grid = field.grid();
    let mut out = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    out.write_all(&(grid.dim() as u64).to_le_bytes())?;
    out.write_all(&(grid.points_per_axis() as u64).to_le_bytes())?;
    out.write_all(&grid.half_extent().to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read a field in the flat binary layout (or JSON when the file ends in
/// `.json`).
pub fn read_field(path: &Path) -> Result<Field> {
    if path.extension().map_or(false, |e| e == "json") {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text)
            .with_context(|| format!("parsing field JSON {}", path.display()));
    }
    let mut file =
        fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut header = [0u8; 24];
    file.read_exact(&mut header).context("reading field header")?;
    let dim = u64::from_le_bytes(header[0..8].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let grid = Grid::new(dim, n, l).map_err(|e| anyhow!("bad field header: {e}"))?;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload).context("reading field payload")?;
    if payload.len() != grid.len() * 8 {
        bail!(
            "field payload holds {} bytes, grid {}^{} needs {}",
            payload.len(),
            n,
            dim,
            grid.len() * 8
        );
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(grid, values).map_err(|e| anyhow!("invalid field data: {e}"))
}

/// Write a field as JSON (small cases).
pub fn write_field_json(path: &Path, field: &Field) -> Result<()> {
    let text = serde_json::to_string(field)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Write a field choosing the format by extension (`.json` or binary).
pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    if path.extension().map_or(false, |e| e == "json") {
        write_field_json(path, field)
    } else {
        write_field_binary(path, field)
    }
}

/// Write a kernel table: the same header followed by its `(2N)^dim` padded
/// samples (kind and alpha travel as CLI flags, not in the file).
pub fn write_table_binary(path: &Path, table: &KernelTable) -> Result<()> {
    let grid = table.grid();
    let mut out = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    out.write_all(&(grid.dim() as u64).to_le_bytes())?;
    out.write_all(&(grid.points_per_axis() as u64).to_le_bytes())?;
    out.write_all(&grid.half_extent().to_le_bytes())?;
    for v in table.padded_samples() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Parse the set DSL: primitives joined by `+`, each one of
///
/// ```text
/// box:lo1,hi1[;lo2,hi2[;lo3,hi3]]
/// ball:c1[,c2[,c3]];r
/// ```
pub fn parse_set(grid: Grid, text: &str) -> Result<GridSet> {
    let mut set = GridSet::empty(grid);
    for part in text.split('+') {
        let part = part.trim();
        let piece = if let Some(body) = part.strip_prefix("box:") {
            parse_box(grid, body)?
        } else if let Some(body) = part.strip_prefix("ball:") {
            parse_ball(grid, body)?
        } else {
            bail!("set primitive {part:?} must start with box: or ball:");
        };
        set = set.union(&piece).map_err(|e| anyhow!("{e}"))?;
    }
    if set.is_empty() {
        bail!("set {text:?} selects no grid cells");
    }
    Ok(set)
}

fn parse_box(grid: Grid, body: &str) -> Result<GridSet> {
    let mut lo = [0.0f64; 3];
    let mut hi = [0.0f64; 3];
    let axes: Vec<&str> = body.split(';').collect();
    if axes.len() != grid.dim() {
        bail!(
            "box needs {} axis ranges (lo,hi separated by ';'), got {}",
            grid.dim(),
            axes.len()
        );
    }
    for (a, axis) in axes.iter().enumerate() {
        let ends: Vec<&str> = axis.split(',').collect();
        if ends.len() != 2 {
            bail!("box axis {a} needs lo,hi, got {axis:?}");
        }
        lo[a] = ends[0].trim().parse().with_context(|| format!("box axis {a} lo"))?;
        hi[a] = ends[1].trim().parse().with_context(|| format!("box axis {a} hi"))?;
        if lo[a] >= hi[a] {
            bail!("box axis {a} needs lo < hi, got {},{}", lo[a], hi[a]);
        }
    }
    Ok(GridSet::boxset(grid, lo, hi))
}

fn parse_ball(grid: Grid, body: &str) -> Result<GridSet> {
    let parts: Vec<&str> = body.split(';').collect();
    if parts.len() != 2 {
        bail!("ball needs center;radius, got {body:?}");
    }
    let coords: Vec<&str> = parts[0].split(',').collect();
    if coords.len() != grid.dim() {
        bail!("ball center needs {} coordinates, got {}", grid.dim(), coords.len());
    }
    let mut center = [0.0f64; 3];
    for (a, c) in coords.iter().enumerate() {
        center[a] = c.trim().parse().with_context(|| format!("ball center axis {a}"))?;
    }
    let r: f64 = parts[1].trim().parse().context("ball radius")?;
    if !(r > 0.0) {
        bail!("ball radius must be positive, got {r}");
    }
    Ok(GridSet::ball(grid, center, r))
}

/// Read an atomic measure from JSON: either a bare array of atoms or an
/// object with an `atoms` array.
pub fn read_measure(path: &Path, dim: usize) -> Result<AtomicMeasure> {
    #[derive(serde::Deserialize)]
    struct AtomIn {
        location: Vec<f64>,
        mass: f64,
    }
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum MeasureIn {
        Bare(Vec<AtomIn>),
        Wrapped { atoms: Vec<AtomIn> },
    }
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed: MeasureIn = serde_json::from_str(&text)
        .with_context(|| format!("parsing measure JSON {}", path.display()))?;
    let atoms_in = match parsed {
        MeasureIn::Bare(a) => a,
        MeasureIn::Wrapped { atoms } => atoms,
    };
    let mut atoms = Vec::with_capacity(atoms_in.len());
    for (i, a) in atoms_in.iter().enumerate() {
        if a.location.len() < dim {
            bail!("atom {i} has {} coordinates, needs {dim}", a.location.len());
        }
        let mut location = [0.0f64; 3];
        for (ax, v) in a.location.iter().take(3).enumerate() {
            location[ax] = *v;
        }
        atoms.push(Atom { location, mass: a.mass });
    }
    AtomicMeasure::new(atoms, dim).map_err(|e| anyhow!("invalid measure: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_field_round_trip() {
        let grid = Grid::new(2, 8, 1.0).unwrap();
        let field = Field::from_fn(grid, |p| p[0] + 2.0 * p[1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_field_binary(&path, &field).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.grid(), grid);
        assert_eq!(back.values(), field.values());
    }

    #[test]
    fn json_field_round_trip() {
        let grid = Grid::new(1, 8, 1.0).unwrap();
        let field = Field::from_fn(grid, |p| p[0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        write_field(&path, &field).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.values(), field.values());
    }

    #[test]
    fn set_dsl_box_ball_union() {
        let grid = Grid::new(1, 64, 4.0).unwrap();
        let set = parse_set(grid, "box:0,1+ball:-2;0.5").unwrap();
        assert!(!set.is_empty());
        let box_only = parse_set(grid, "box:0,1").unwrap();
        assert!(box_only.count() < set.count());
        assert!(parse_set(grid, "wedge:1").is_err());
        assert!(parse_set(grid, "box:1,0").is_err());
    }

    #[test]
    fn measure_json_forms() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.json");
        fs::write(&path, r#"[{"location": [0.1], "mass": 2.0}]"#).unwrap();
        let mu = read_measure(&path, 1).unwrap();
        assert_eq!(mu.atoms().len(), 1);
        fs::write(&path, r#"{"atoms": [{"location": [0.1, 0.2], "mass": 1.0}]}"#).unwrap();
        let mu2 = read_measure(&path, 2).unwrap();
        assert!((mu2.total_mass() - 1.0).abs() < 1e-15);
    }
}
