//! Scene-model XML exchange and the digitalization savings calculator.
//!
//! Document layout:
//!
//! ```xml
//! <SceneModel name="tact-0" euler="zyx-intrinsic" origin="scene-zero">
//!   <InstanceHierarchy>
//!     <InternalElement class="car" id="0" source="estimated">
//!       <Pose x_mm="..." y_mm="..." z_mm="..." roll_deg="..." pitch_deg="..." yaw_deg="..."/>
//!     </InternalElement>
//!   </InstanceHierarchy>
//! </SceneModel>
//! ```
//!
//! `InternalElement` may carry an optional `template` attribute naming the
//! reference template the pose refers to.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use quick_xml::events::{BytesDecl, BytesStart, Event};
use quick_xml::{Reader, Writer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::ObjectPose;
use crate::scene::GroundTruth;

pub const EULER_CONVENTION: &str = "zyx-intrinsic";
pub const DEFAULT_ORIGIN: &str = "scene-zero";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseSource {
    Estimated,
    GroundTruth,
}

impl PoseSource {
    pub fn name(self) -> &'static str {
        match self {
            PoseSource::Estimated => "estimated",
            PoseSource::GroundTruth => "ground-truth",
        }
    }
}

impl fmt::Display for PoseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoseSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimated" => Ok(PoseSource::Estimated),
            "ground-truth" => Ok(PoseSource::GroundTruth),
            _ => Err(Error::validation(format!("unknown pose source '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelObject {
    pub pose: ObjectPose,
    pub source: PoseSource,
    pub template: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    pub name: String,
    /// Where the scene frame sits; z is up and angles follow
    /// [`EULER_CONVENTION`].
    pub origin: String,
    pub objects: Vec<ModelObject>,
}

impl SceneModel {
    pub fn new(name: impl Into<String>) -> Self {
        SceneModel { name: name.into(), origin: DEFAULT_ORIGIN.to_string(), objects: Vec::new() }
    }

    pub fn from_poses(name: impl Into<String>, poses: &[ObjectPose], source: PoseSource) -> Self {
        let mut m = SceneModel::new(name);
        m.objects = poses
            .iter()
            .map(|p| ModelObject { pose: p.clone(), source, template: Some(p.class.clone()) })
            .collect();
        m
    }

    /// Manifest of the true poses of a synthetic scene.
    pub fn from_ground_truth(name: impl Into<String>, truth: &GroundTruth) -> Self {
        SceneModel::from_poses(name, &truth.poses(), PoseSource::GroundTruth)
    }

    pub fn poses(&self) -> Vec<ObjectPose> {
        self.objects.iter().map(|o| o.pose.clone()).collect()
    }

    /// Instance ids unique per class, names non-empty, numbers finite.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            let p = &o.pose;
            if p.class.is_empty() {
                return Err(Error::validation("object with empty class name"));
            }
            if !seen.insert((p.class.as_str(), p.instance)) {
                return Err(Error::validation(format!("duplicate instance id {} for class {}", p.instance, p.class)));
            }
            let values = [p.x_mm, p.y_mm, p.z_mm, p.roll_deg, p.pitch_deg, p.yaw_deg];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("non-finite pose for {} #{}", p.class, p.instance)));
            }
        }
        Ok(())
    }

    pub fn to_xml(&self) -> Result<String> {
        self.validate()?;
        let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
        w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))?;
        w.create_element("SceneModel")
            .with_attributes([
                ("name", self.name.as_str()),
                ("euler", EULER_CONVENTION),
                ("origin", self.origin.as_str()),
            ])
            .write_inner_content(|w| {
                let hierarchy = w.create_element("InstanceHierarchy");
                if self.objects.is_empty() {
                    hierarchy.write_empty()?;
                    return Ok(());
                }
                hierarchy.write_inner_content(|w| {
                    for o in &self.objects {
                        let id = o.pose.instance.to_string();
                        let mut el = w.create_element("InternalElement").with_attributes([
                            ("class", o.pose.class.as_str()),
                            ("id", id.as_str()),
                            ("source", o.source.name()),
                        ]);
                        if let Some(t) = &o.template {
                            el = el.with_attribute(("template", t.as_str()));
                        }
                        el.write_inner_content(|w| {
                            let p = &o.pose;
                            // `{}` on f64 is the shortest string that parses back exactly.
                            let vals = [p.x_mm, p.y_mm, p.z_mm, p.roll_deg, p.pitch_deg, p.yaw_deg].map(|v| v.to_string());
                            w.create_element("Pose")
                                .with_attributes(POSE_ATTRS.iter().zip(&vals).map(|(k, v)| (*k, v.as_str())))
                                .write_empty()?;
                            Ok(())
                        })?;
                    }
                    Ok(())
                })?;
                Ok(())
            })?;
        let mut text = String::from_utf8(w.into_inner()).expect("writer emits UTF-8");
        text.push('\n');
        Ok(text)
    }

    pub fn from_xml(text: &str) -> Result<SceneModel> {
        parse_document(text)
    }
}

const POSE_ATTRS: [&str; 6] = ["x_mm", "y_mm", "z_mm", "roll_deg", "pitch_deg", "yaw_deg"];

pub fn write_aml(model: &SceneModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model.to_xml()?)?;
    Ok(())
}

pub fn parse_aml(path: impl AsRef<Path>) -> Result<SceneModel> {
    SceneModel::from_xml(&std::fs::read_to_string(path)?)
}

fn schema(element: &str, message: impl Into<String>) -> Error {
    Error::Schema { element: element.to_string(), message: message.into() }
}

struct Attrs {
    element: String,
    pairs: Vec<(String, String)>,
}

impl Attrs {
    fn read(e: &BytesStart<'_>) -> Result<Attrs> {
        let element = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let mut pairs = Vec::new();
        for a in e.attributes() {
            let a = a.map_err(|err| schema(&element, err.to_string()))?;
            let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            let value = a.unescape_value().map_err(|err| schema(&element, err.to_string()))?.into_owned();
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(schema(&element, format!("attribute '{key}' repeated")));
            }
            pairs.push((key, value));
        }
        Ok(Attrs { element, pairs })
    }

    fn optional(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.optional(key).ok_or_else(|| schema(&self.element, format!("missing required attribute '{key}'")))
    }

    fn number(&self, key: &str) -> Result<f64> {
        let raw = self.required(key)?;
        raw.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| schema(&self.element, format!("attribute '{key}' is not a finite number: '{raw}'")))
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(schema(&self.element, format!("unexpected attribute '{k}'"))),
            None => Ok(()),
        }
    }
}

/// Parser position within the fixed nesting.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Level {
    Document,
    Model,
    Hierarchy,
    Element,
    Done,
}

fn parse_document(text: &str) -> Result<SceneModel> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut level = Level::Document;
    let mut model = SceneModel::new("");
    let mut saw_hierarchy = false;
    // Element being filled: header attributes and, once seen, its pose.
    let mut current: Option<(ModelObject, bool)> = None;
    let mut ids = BTreeSet::new();

    loop {
        let event = reader.read_event().map_err(|e| Error::Parse {
            line: line_of(text, reader.error_position()),
            message: e.to_string(),
        })?;
        let (start, empty) = match &event {
            Event::Start(e) => (Some(e), false),
            Event::Empty(e) => (Some(e), true),
            _ => (None, false),
        };
        if let Some(e) = start {
            let a = Attrs::read(e)?;
            match (level, a.element.as_str()) {
                (Level::Document, "SceneModel") => {
                    a.only(&["name", "euler", "origin"])?;
                    model.name = a.required("name")?.to_string();
                    let euler = a.required("euler")?;
                    if euler != EULER_CONVENTION {
                        return Err(schema("SceneModel", format!("unsupported euler convention '{euler}'")));
                    }
                    model.origin = a.required("origin")?.to_string();
                    level = if empty { Level::Done } else { Level::Model };
                }
                (Level::Model, "InstanceHierarchy") => {
                    a.only(&[])?;
                    if saw_hierarchy {
                        return Err(schema("InstanceHierarchy", "appears more than once"));
                    }
                    saw_hierarchy = true;
                    if !empty {
                        level = Level::Hierarchy;
                    }
                }
                (Level::Hierarchy, "InternalElement") => {
                    a.only(&["class", "id", "source", "template"])?;
                    let class = a.required("class")?.to_string();
                    let raw_id = a.required("id")?;
                    let instance: u32 = raw_id
                        .parse()
                        .map_err(|_| schema("InternalElement", format!("id '{raw_id}' is not a non-negative integer")))?;
                    let source: PoseSource =
                        a.required("source")?.parse().map_err(|e: Error| schema("InternalElement", e.to_string()))?;
                    if !ids.insert((class.clone(), instance)) {
                        return Err(schema("InternalElement", format!("duplicate id {instance} for class {class}")));
                    }
                    if empty {
                        return Err(schema("InternalElement", format!("{class} #{instance} has no Pose")));
                    }
                    let pose = ObjectPose {
                        class,
                        instance,
                        x_mm: 0.0,
                        y_mm: 0.0,
                        z_mm: 0.0,
                        roll_deg: 0.0,
                        pitch_deg: 0.0,
                        yaw_deg: 0.0,
                    };
                    current = Some((ModelObject { pose, source, template: a.optional("template").map(String::from) }, false));
                    level = Level::Element;
                }
                (Level::Element, "Pose") => {
                    a.only(&POSE_ATTRS)?;
                    let (obj, has_pose) = current.as_mut().expect("inside an element");
                    if *has_pose {
                        return Err(schema("Pose", format!("{} #{} has more than one Pose", obj.pose.class, obj.pose.instance)));
                    }
                    let p = &mut obj.pose;
                    p.x_mm = a.number("x_mm")?;
                    p.y_mm = a.number("y_mm")?;
                    p.z_mm = a.number("z_mm")?;
                    p.roll_deg = a.number("roll_deg")?;
                    p.pitch_deg = a.number("pitch_deg")?;
                    p.yaw_deg = a.number("yaw_deg")?;
                    *has_pose = true;
                    if !empty {
                        return Err(schema("Pose", "must be an empty element"));
                    }
                }
                (_, other) => return Err(schema(other, "unexpected element at this position")),
            }
            continue;
        }
        match event {
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                level = match level {
                    Level::Element => {
                        let (obj, has_pose) = current.take().expect("inside an element");
                        if !has_pose {
                            return Err(schema("InternalElement", format!("{} #{} has no Pose", obj.pose.class, obj.pose.instance)));
                        }
                        model.objects.push(obj);
                        Level::Hierarchy
                    }
                    Level::Hierarchy => Level::Model,
                    Level::Model => Level::Done,
                    _ => return Err(schema(&name, "unexpected closing tag")),
                };
            }
            Event::Text(t) => {
                let raw = String::from_utf8_lossy(t.as_ref()).into_owned();
                if !raw.trim().is_empty() {
                    return Err(schema("SceneModel", format!("unexpected text '{}'", raw.trim())));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if level != Level::Done {
        return Err(schema("SceneModel", "document is incomplete"));
    }
    if !saw_hierarchy {
        return Err(schema("SceneModel", "missing InstanceHierarchy"));
    }
    Ok(model)
}

fn line_of(text: &str, byte: u64) -> usize {
    let end = (byte as usize).min(text.len());
    text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Cost factors of recurring plant digitalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavingsInput {
    /// Euro per square meter scanned.
    pub cost_per_m2: f64,
    pub area_per_plant: f64,
    pub scanned_fraction: f64,
    pub n_plants: f64,
    pub scans_per_year: f64,
    pub automation_degree: f64,
}

impl SavingsInput {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cost_per_m2", self.cost_per_m2),
            ("area_per_plant", self.area_per_plant),
            ("scanned_fraction", self.scanned_fraction),
            ("n_plants", self.n_plants),
            ("scans_per_year", self.scans_per_year),
            ("automation_degree", self.automation_degree),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        for (name, v) in [("scanned_fraction", self.scanned_fraction), ("automation_degree", self.automation_degree)] {
            if v > 1.0 {
                return Err(Error::validation(format!("{name} must be <= 1, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub total_cost_per_year: f64,
    pub savings_per_year: f64,
}

pub fn compute_savings(input: &SavingsInput) -> Result<Savings> {
    input.validate()?;
    let total = input.cost_per_m2 * input.area_per_plant * input.scanned_fraction * input.n_plants * input.scans_per_year;
    Ok(Savings { total_cost_per_year: total, savings_per_year: total * input.automation_degree })
}

/// Whole euros with comma thousands separators, e.g. `5,985,000`.
pub fn format_euros(value: f64) -> String {
    let rounded = value.round();
    let digits = format!("{:.0}", rounded.abs());
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if rounded < 0.0 {
        out.insert(0, '-');
    }
    out
}
