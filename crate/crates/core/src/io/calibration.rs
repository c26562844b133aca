//! Rig calibration and pose documents (TOML).
//!
//! ```toml
//! format = "fdist-calibration"
//! version = 1
//!
//! [[camera]]
//! name = "front"
//! model = "polynomial"      # ucm | eucm | rectilinear | stereographic | double_sphere
//! width = 1280
//! height = 966
//! cx = 640.3
//! cy = 483.7
//! a1 = 339.749
//! a2 = -31.988
//! a3 = 48.275
//! a4 = -7.201
//! half_fov_deg = 97.5       # polynomial only, optional
//!
//! [camera.extrinsics]       # optional, camera -> vehicle
//! qw = 1.0
//! qx = 0.0
//! qy = 0.0
//! qz = 0.0
//! tx = 3.7
//! ty = 0.0
//! tz = 0.6
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::camera::{Intrinsics, ModelKind, RadialModel, DEFAULT_POLY_HALF_FOV_DEG};
use crate::error::{Error, Result};
use crate::pose::{Pose, Quaternion};

pub const CALIBRATION_FORMAT: &str = "fdist-calibration";
pub const POSES_FORMAT: &str = "fdist-poses";
pub const DOC_VERSION: u32 = 1;
pub const MAX_CAMERAS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct RigCamera {
    pub name: String,
    pub intrinsics: Intrinsics<f64>,
    pub extrinsics: Option<Pose<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rig {
    pub cameras: Vec<RigCamera>,
}

impl Rig {
    pub fn camera(&self, name: &str) -> Option<&RigCamera> {
        self.cameras.iter().find(|c| c.name == name)
    }
}

/// Field reader that records the path of every access for error messages
/// and rejects keys nobody asked for.
struct Fields<'a> {
    path: String,
    table: &'a Table,
    seen: Vec<&'static str>,
}

impl<'a> Fields<'a> {
    fn new(path: impl Into<String>, table: &'a Table) -> Self {
        Self {
            path: path.into(),
            table,
            seen: Vec::new(),
        }
    }

    fn at(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn opt(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table.get(key)
    }

    fn req(&mut self, key: &'static str) -> Result<&'a Value> {
        let path = self.at(key);
        self.opt(key).ok_or_else(|| Error::schema(path, "missing required field"))
    }

    fn float(&mut self, key: &'static str) -> Result<f64> {
        let path = self.at(key);
        let v = match self.req(key)? {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            _ => return Err(Error::schema(path, "expected a number")),
        };
        if !v.is_finite() {
            return Err(Error::schema(path, "must be finite"));
        }
        Ok(v)
    }

    fn opt_float(&mut self, key: &'static str) -> Result<Option<f64>> {
        if self.table.contains_key(key) {
            self.float(key).map(Some)
        } else {
            self.seen.push(key);
            Ok(None)
        }
    }

    fn uint(&mut self, key: &'static str) -> Result<u64> {
        let path = self.at(key);
        match self.req(key)? {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(Error::schema(path, "expected a non-negative integer")),
        }
    }

    fn string(&mut self, key: &'static str) -> Result<&'a str> {
        let path = self.at(key);
        self.req(key)?
            .as_str()
            .ok_or_else(|| Error::schema(path, "expected a string"))
    }

    fn array_of_tables(&mut self, key: &'static str) -> Result<Vec<&'a Table>> {
        let path = self.at(key);
        let Some(v) = self.opt(key) else { return Ok(Vec::new()) };
        let arr = v.as_array().ok_or_else(|| Error::schema(&path, "expected an array of tables"))?;
        arr.iter()
            .enumerate()
            .map(|(i, t)| t.as_table().ok_or_else(|| Error::schema(format!("{path}[{i}]"), "expected a table")))
            .collect()
    }

    fn finish(self) -> Result<()> {
        let mut unknown: Vec<&String> = self.table.keys().filter(|k| !self.seen.contains(&k.as_str())).collect();
        unknown.sort();
        match unknown.first() {
            Some(k) => Err(Error::schema(self.at(k), "unknown field")),
            None => Ok(()),
        }
    }
}

fn header(f: &mut Fields<'_>, format: &str) -> Result<()> {
    let found = f.string("format")?;
    if found != format {
        return Err(Error::schema("format", format!("expected \"{format}\", found \"{found}\"")));
    }
    let version = f.uint("version")?;
    if version != DOC_VERSION as u64 {
        return Err(Error::Version {
            found: version.min(u32::MAX as u64) as u32,
            expected: DOC_VERSION,
        });
    }
    Ok(())
}

fn pose_fields(f: &mut Fields<'_>) -> Result<Pose<f64>> {
    let q = Quaternion::new(f.float("qw")?, f.float("qx")?, f.float("qy")?, f.float("qz")?);
    let t = [f.float("tx")?, f.float("ty")?, f.float("tz")?];
    Pose::new(q, t).map_err(|e| Error::schema(f.path.clone(), e.to_string()))
}

fn dim(f: &mut Fields<'_>, key: &'static str) -> Result<usize> {
    let path = f.at(key);
    let v = f.uint(key)?;
    if v == 0 || v > u32::MAX as u64 {
        return Err(Error::schema(path, "image dimension must be positive"));
    }
    Ok(v as usize)
}

fn parse_camera(path: String, table: &Table) -> Result<RigCamera> {
    let mut f = Fields::new(path, table);
    let name = f.string("name")?.to_string();
    let model_path = f.at("model");
    let kind_name = f.string("model")?;
    let kind = ModelKind::from_name(kind_name)
        .ok_or_else(|| Error::schema(&model_path, format!("unknown camera model \"{kind_name}\"")))?;
    let (width, height) = (dim(&mut f, "width")?, dim(&mut f, "height")?);
    let (cx, cy) = (f.float("cx")?, f.float("cy")?);
    let model = match kind {
        ModelKind::Polynomial => {
            let a = [f.float("a1")?, f.float("a2")?, f.float("a3")?, f.float("a4")?];
            let half_fov = f.opt_float("half_fov_deg")?.unwrap_or(DEFAULT_POLY_HALF_FOV_DEG).to_radians();
            RadialModel::Polynomial { a, half_fov }
        }
        ModelKind::Ucm => RadialModel::Ucm {
            f: f.float("f")?,
            xi: f.float("xi")?,
        },
        ModelKind::Eucm => RadialModel::Eucm {
            f: f.float("f")?,
            alpha: f.float("alpha")?,
            beta: f.float("beta")?,
        },
        ModelKind::Rectilinear => RadialModel::Rectilinear { f: f.float("f")? },
        ModelKind::Stereographic => RadialModel::Stereographic { f: f.float("f")? },
        ModelKind::DoubleSphere => RadialModel::DoubleSphere {
            f: f.float("f")?,
            xi: f.float("xi")?,
            alpha: f.float("alpha")?,
        },
    };
    let extrinsics = match f.opt("extrinsics") {
        None => None,
        Some(v) => {
            let path = f.at("extrinsics");
            let t = v.as_table().ok_or_else(|| Error::schema(&path, "expected a table"))?;
            let mut ef = Fields::new(path, t);
            let pose = pose_fields(&mut ef)?;
            ef.finish()?;
            Some(pose)
        }
    };
    let intrinsics = Intrinsics::new(model, cx, cy, width, height).map_err(|e| Error::schema(model_path, e.to_string()))?;
    f.finish()?;
    Ok(RigCamera {
        name,
        intrinsics,
        extrinsics,
    })
}

pub fn parse_calibration(text: &str) -> Result<Rig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;
    let mut f = Fields::new("", &table);
    header(&mut f, CALIBRATION_FORMAT)?;
    let tables = f.array_of_tables("camera")?;
    f.finish()?;
    if tables.is_empty() {
        return Err(Error::schema("camera", "at least one camera is required"));
    }
    if tables.len() > MAX_CAMERAS {
        return Err(Error::schema("camera", format!("at most {MAX_CAMERAS} cameras are supported")));
    }
    let cameras = tables
        .into_iter()
        .enumerate()
        .map(|(i, t)| parse_camera(format!("camera[{i}]"), t))
        .collect::<Result<Vec<_>>>()?;
    for (i, c) in cameras.iter().enumerate() {
        if cameras[..i].iter().any(|o| o.name == c.name) {
            return Err(Error::schema(format!("camera[{i}].name"), format!("duplicate camera name \"{}\"", c.name)));
        }
    }
    Ok(Rig { cameras })
}

fn pose_table(p: &Pose<f64>) -> Table {
    let q = p.rotation();
    let t = p.translation();
    let mut tab = Table::new();
    for (k, v) in [("qw", q.w), ("qx", q.x), ("qy", q.y), ("qz", q.z), ("tx", t[0]), ("ty", t[1]), ("tz", t[2])] {
        tab.insert(k.into(), Value::Float(v));
    }
    tab
}

pub fn format_calibration(rig: &Rig) -> String {
    let mut root = Table::new();
    root.insert("format".into(), CALIBRATION_FORMAT.into());
    root.insert("version".into(), Value::Integer(DOC_VERSION as i64));
    let cams = rig
        .cameras
        .iter()
        .map(|c| {
            let m = &c.intrinsics;
            let mut t = Table::new();
            t.insert("name".into(), c.name.as_str().into());
            t.insert("model".into(), m.kind().name().into());
            t.insert("width".into(), Value::Integer(m.width() as i64));
            t.insert("height".into(), Value::Integer(m.height() as i64));
            t.insert("cx".into(), Value::Float(m.cx()));
            t.insert("cy".into(), Value::Float(m.cy()));
            let params: Vec<(&str, f64)> = match *m.model() {
                RadialModel::Polynomial { a, half_fov } => vec![
                    ("a1", a[0]),
                    ("a2", a[1]),
                    ("a3", a[2]),
                    ("a4", a[3]),
                    ("half_fov_deg", half_fov.to_degrees()),
                ],
                RadialModel::Ucm { f, xi } => vec![("f", f), ("xi", xi)],
                RadialModel::Eucm { f, alpha, beta } => vec![("f", f), ("alpha", alpha), ("beta", beta)],
                RadialModel::Rectilinear { f } | RadialModel::Stereographic { f } => vec![("f", f)],
                RadialModel::DoubleSphere { f, xi, alpha } => vec![("f", f), ("xi", xi), ("alpha", alpha)],
            };
            for (k, v) in params {
                t.insert(k.into(), Value::Float(v));
            }
            if let Some(p) = &c.extrinsics {
                t.insert("extrinsics".into(), Value::Table(pose_table(p)));
            }
            Value::Table(t)
        })
        .collect();
    root.insert("camera".into(), Value::Array(cams));
    toml::to_string(&root).expect("calibration tables serialize")
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<Rig> {
    parse_calibration(&std::fs::read_to_string(path)?)
}

pub fn save_calibration(path: impl AsRef<Path>, rig: &Rig) -> Result<()> {
    std::fs::write(path, format_calibration(rig))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedPose {
    pub name: String,
    pub pose: Pose<f64>,
}

pub fn parse_poses(text: &str) -> Result<Vec<NamedPose>> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;
    let mut f = Fields::new("", &table);
    header(&mut f, POSES_FORMAT)?;
    let tables = f.array_of_tables("pose")?;
    f.finish()?;
    tables
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut pf = Fields::new(format!("pose[{i}]"), t);
            let name = pf.string("name")?.to_string();
            let pose = pose_fields(&mut pf)?;
            pf.finish()?;
            Ok(NamedPose { name, pose })
        })
        .collect()
}

pub fn format_poses(poses: &[NamedPose]) -> String {
    let mut root = Table::new();
    root.insert("format".into(), POSES_FORMAT.into());
    root.insert("version".into(), Value::Integer(DOC_VERSION as i64));
    let arr = poses
        .iter()
        .map(|p| {
            let mut t = pose_table(&p.pose);
            t.insert("name".into(), p.name.as_str().into());
            Value::Table(t)
        })
        .collect();
    root.insert("pose".into(), Value::Array(arr));
    toml::to_string(&root).expect("pose tables serialize")
}

pub fn load_poses(path: impl AsRef<Path>) -> Result<Vec<NamedPose>> {
    parse_poses(&std::fs::read_to_string(path)?)
}

pub fn save_poses(path: impl AsRef<Path>, poses: &[NamedPose]) -> Result<()> {
    std::fs::write(path, format_poses(poses))?;
    Ok(())
}
