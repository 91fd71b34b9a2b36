//! Benchmark reports: metric registry, per-method aggregation, best and
//! second-best ranking per metric direction, merging of externally computed
//! metrics, and markdown/JSON/CSV rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::HigherBetter => "↑",
            Direction::LowerBetter => "↓",
        }
    }

    /// True when `a` ranks ahead of `b`.
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::HigherBetter => a > b,
            Direction::LowerBetter => a < b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    Native,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    pub direction: Direction,
    pub source: MetricSource,
    pub decimals: usize,
}

impl MetricSpec {
    pub fn new(name: &str, direction: Direction, source: MetricSource, decimals: usize) -> Self {
        Self {
            name: name.to_string(),
            direction,
            source,
            decimals,
        }
    }
}

pub const PSNR: &str = "PSNR";
pub const SSIM: &str = "SSIM";
pub const MSE: &str = "MSE";
pub const L1_TEXTURE: &str = "L1_texture";
pub const L1_INTENSITY: &str = "L1_intensity";
pub const BLUR_SCORE_BOX: &str = "blur_score_box";
pub const BLUR_SCORE_GAUSSIAN: &str = "blur_score_gaussian";

/// Ordered set of known metrics; report columns follow this order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricRegistry {
    metrics: Vec<MetricSpec>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        use Direction::{HigherBetter as Up, LowerBetter as Down};
        use MetricSource::{External as Ext, Native as Nat};
        let metrics = vec![
            MetricSpec::new(PSNR, Up, Nat, 2),
            MetricSpec::new(SSIM, Up, Nat, 4),
            MetricSpec::new(MSE, Down, Nat, 2),
            MetricSpec::new("LPIPS", Down, Ext, 4),
            MetricSpec::new("ST-LPIPS", Down, Ext, 4),
            MetricSpec::new("CLIP-IQA", Up, Ext, 4),
            MetricSpec::new("MUSIQ", Up, Ext, 2),
            MetricSpec::new("NIQE", Down, Ext, 4),
            MetricSpec::new("BRISQUE", Down, Ext, 2),
            MetricSpec::new("NRQM", Up, Ext, 4),
            MetricSpec::new(L1_TEXTURE, Down, Nat, 4),
            MetricSpec::new(L1_INTENSITY, Down, Nat, 4),
            MetricSpec::new(BLUR_SCORE_BOX, Up, Nat, 2),
            MetricSpec::new(BLUR_SCORE_GAUSSIAN, Up, Nat, 2),
        ];
        Self { metrics }
    }
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self { metrics: vec![] }
    }

    pub fn register(&mut self, spec: MetricSpec) -> Result<()> {
        if spec.name.is_empty() || spec.name.contains([',', '|', '\n']) {
            return Err(Error::InvalidParameter(format!(
                "invalid metric name {:?}",
                spec.name
            )));
        }
        if self.get(&spec.name).is_some() {
            return Err(Error::InvalidParameter(format!(
                "metric {} is already registered",
                spec.name
            )));
        }
        self.metrics.push(spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&MetricSpec> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn metrics(&self) -> &[MetricSpec] {
        &self.metrics
    }
}

/// A metric value; infinities serialize as `"inf"` / `"-inf"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Score(pub f64);

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            v if v.is_finite() => s.serialize_f64(v),
            v if v == f64::INFINITY => s.serialize_str("inf"),
            v if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            _ => s.serialize_str("nan"),
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Score(v)),
            Raw::Text(t) => parse_value(&t)
                .map(Score)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid score {t:?}"))),
        }
    }
}

fn parse_value(text: &str) -> Option<f64> {
    match text.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// Metric values of one image for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScores {
    pub image: String,
    pub values: BTreeMap<String, Score>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricMean {
    pub mean: Score,
    /// Images contributing to the mean.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub name: String,
    pub image_count: usize,
    pub means: BTreeMap<String, MetricMean>,
    pub per_image: Vec<ImageScores>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub metric: String,
    pub best: Option<String>,
    pub second: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub images: Vec<String>,
    pub columns: Vec<MetricSpec>,
    pub methods: Vec<MethodResult>,
    pub rankings: Vec<Ranking>,
}

impl EvalReport {
    /// Aggregate per-image scores into means, columns and rankings.
    ///
    /// Methods keep their given order; images are sorted.
    pub fn build(
        dataset: &str,
        images: Vec<String>,
        methods: Vec<(String, Vec<ImageScores>)>,
        registry: &MetricRegistry,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, _) in &methods {
            if !seen.insert(name.as_str()) {
                return Err(Error::Invalid(format!("duplicate method {name}")));
            }
        }
        let mut report = EvalReport {
            dataset: dataset.to_string(),
            images: images.into_iter().collect::<BTreeSet<_>>().into_iter().collect(),
            columns: vec![],
            methods: methods
                .into_iter()
                .map(|(name, mut per_image)| {
                    per_image.sort_by(|a, b| a.image.cmp(&b.image));
                    MethodResult {
                        name,
                        image_count: 0,
                        means: BTreeMap::new(),
                        per_image,
                    }
                })
                .collect(),
            rankings: vec![],
        };
        report.recompute(registry)?;
        Ok(report)
    }

    fn recompute(&mut self, registry: &MetricRegistry) -> Result<()> {
        let mut used = BTreeSet::new();
        for m in &self.methods {
            for s in &m.per_image {
                for name in s.values.keys() {
                    if registry.get(name).is_none() {
                        return Err(Error::UnknownMetric(name.clone()));
                    }
                    used.insert(name.clone());
                }
            }
        }
        self.columns = registry
            .metrics()
            .iter()
            .filter(|m| used.contains(&m.name))
            .cloned()
            .collect();
        for m in &mut self.methods {
            m.image_count = m.per_image.len();
            m.means.clear();
            for col in &self.columns {
                let vals: Vec<f64> = m
                    .per_image
                    .iter()
                    .filter_map(|s| s.values.get(&col.name).map(|v| v.0))
                    .collect();
                if !vals.is_empty() {
                    m.means.insert(
                        col.name.clone(),
                        MetricMean {
                            mean: Score(vals.iter().sum::<f64>() / vals.len() as f64),
                            count: vals.len(),
                        },
                    );
                }
            }
        }
        self.rankings = self
            .columns
            .iter()
            .map(|col| {
                let mut order: Vec<(&str, f64)> = self
                    .methods
                    .iter()
                    .filter_map(|m| m.means.get(&col.name).map(|v| (m.name.as_str(), v.mean.0)))
                    .filter(|(_, v)| !v.is_nan())
                    .collect();
                // stable: ties keep method order
                order.sort_by(|a, b| {
                    if col.direction.better(a.1, b.1) {
                        std::cmp::Ordering::Less
                    } else if col.direction.better(b.1, a.1) {
                        std::cmp::Ordering::Greater
                    } else {
                        std::cmp::Ordering::Equal
                    }
                });
                Ranking {
                    metric: col.name.clone(),
                    best: order.first().map(|o| o.0.to_string()),
                    second: order.get(1).map(|o| o.0.to_string()),
                }
            })
            .collect();
        Ok(())
    }

    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn mean(&self, method: &str, metric: &str) -> Option<f64> {
        self.method(method)?.means.get(metric).map(|m| m.mean.0)
    }

    pub fn ranking(&self, metric: &str) -> Option<&Ranking> {
        self.rankings.iter().find(|r| r.metric == metric)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Json {
            context: "evaluation report".into(),
            message: e.to_string(),
        })
    }
}

/// Append externally computed per-image metrics from CSV `method,image,metric,value`.
///
/// Metrics must be registered as external. Images without a value are left
/// out of that metric's mean and surface as a coverage note.
pub fn merge_external_metrics(report: &EvalReport, csv_text: &str, registry: &MetricRegistry) -> Result<EvalReport> {
    let csv_err = |message: String| Error::Csv {
        context: "external metrics".into(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["method", "image", "metric", "value"] {
        return Err(csv_err(format!(
            "expected header method,image,metric,value, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = report.clone();
    let images: BTreeSet<&str> = report.images.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e.to_string()))?;
        let row = line + 2;
        let (method, image, metric, value) = (&rec[0], &rec[1], &rec[2], &rec[3]);
        match registry.get(metric) {
            None => return Err(Error::UnknownMetric(metric.to_string())),
            Some(spec) if spec.source != MetricSource::External => {
                return Err(csv_err(format!(
                    "row {row}: {metric} is computed natively and cannot be merged"
                )))
            }
            Some(_) => {}
        }
        let v = parse_value(value)
            .ok_or_else(|| csv_err(format!("row {row}: non-numeric value {value:?} for {metric}")))?;
        if !images.contains(image) {
            return Err(csv_err(format!("row {row}: unknown image {image:?}")));
        }
        let m = out
            .methods
            .iter_mut()
            .find(|m| m.name == method)
            .ok_or_else(|| csv_err(format!("row {row}: unknown method {method:?}")))?;
        if !seen.insert((method.to_string(), image.to_string(), metric.to_string())) {
            return Err(csv_err(format!(
                "row {row}: duplicate value for {method}/{image}/{metric}"
            )));
        }
        let idx = match m.per_image.iter().position(|s| s.image == image) {
            Some(i) => i,
            None => {
                m.per_image.push(ImageScores {
                    image: image.to_string(),
                    values: BTreeMap::new(),
                });
                m.per_image.sort_by(|a, b| a.image.cmp(&b.image));
                m.per_image.iter().position(|s| s.image == image).expect("just inserted")
            }
        };
        if m.per_image[idx].values.insert(metric.to_string(), Score(v)).is_some() {
            return Err(csv_err(format!(
                "row {row}: {method}/{image}/{metric} already present in the report"
            )));
        }
    }
    // keep the report's own columns (e.g. custom metrics) resolvable
    let mut merged = registry.clone();
    for col in &report.columns {
        if merged.get(&col.name).is_none() {
            merged.register(col.clone())?;
        }
    }
    out.recompute(&merged)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidParameter(format!(
                "unknown report format {other:?} (expected markdown, json or csv)"
            ))),
        }
    }
}

pub fn format_value(v: f64, decimals: usize) -> String {
    if v == f64::INFINITY {
        return "inf".into();
    }
    if v == f64::NEG_INFINITY {
        return "-inf".into();
    }
    let s = format!("{v:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    let n = report.images.len();
    let _ = writeln!(out, "## {} ({n} images)\n", report.dataset);
    out.push_str("| Method |");
    for c in &report.columns {
        let _ = write!(out, " {}{} |", c.name, c.direction.arrow());
    }
    out.push_str("\n| :--- |");
    for _ in &report.columns {
        out.push_str(" ---: |");
    }
    out.push('\n');
    let mut notes = vec![];
    for m in &report.methods {
        let _ = write!(out, "| {} |", m.name);
        for c in &report.columns {
            let cell = match m.means.get(&c.name) {
                None => "-".to_string(),
                Some(mean) => {
                    if mean.count < n {
                        notes.push(format!("- {} / {}: {}/{n}", c.name, m.name, mean.count));
                    }
                    let text = format_value(mean.mean.0, c.decimals);
                    let rank = report.ranking(&c.name);
                    let is = |who: Option<&Option<String>>| who.and_then(|w| w.as_deref()) == Some(m.name.as_str());
                    if is(rank.map(|r| &r.best)) {
                        format!("**{text}**")
                    } else if is(rank.map(|r| &r.second)) {
                        format!("<u>{text}</u>")
                    } else {
                        text
                    }
                }
            };
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    if !notes.is_empty() {
        out.push_str("\nCoverage (images with a value / images):\n\n");
        for note in notes {
            out.push_str(&note);
            out.push('\n');
        }
    }
    out
}

pub fn render_csv(report: &EvalReport) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    w.write_record(["dataset", "method", "metric", "direction", "mean", "count", "images", "rank"])
        .expect("in-memory write");
    for m in &report.methods {
        for c in &report.columns {
            let Some(mean) = m.means.get(&c.name) else {
                continue;
            };
            let rank = report.ranking(&c.name).map_or("", |r| {
                if r.best.as_deref() == Some(m.name.as_str()) {
                    "best"
                } else if r.second.as_deref() == Some(m.name.as_str()) {
                    "second"
                } else {
                    ""
                }
            });
            let direction = match c.direction {
                Direction::HigherBetter => "higher_better",
                Direction::LowerBetter => "lower_better",
            };
            w.write_record([
                report.dataset.as_str(),
                m.name.as_str(),
                c.name.as_str(),
                direction,
                &format_value(mean.mean.0, c.decimals),
                &mean.count.to_string(),
                &report.images.len().to_string(),
                rank,
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv")
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => render_csv(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(image: &str, pairs: &[(&str, f64)]) -> ImageScores {
        ImageScores {
            image: image.into(),
            values: pairs.iter().map(|(k, v)| (k.to_string(), Score(*v))).collect(),
        }
    }

    fn three_methods() -> EvalReport {
        let methods = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                (
                    format!("m{}", i + 1),
                    vec![scores("a", &[(PSNR, v), (MSE, v)]), scores("b", &[(PSNR, v), (MSE, v)])],
                )
            })
            .collect();
        EvalReport::build("toy", vec!["b".into(), "a".into()], methods, &MetricRegistry::default()).unwrap()
    }

    #[test]
    fn ranking_respects_direction() {
        let r = three_methods();
        assert_eq!(r.images, vec!["a", "b"]);
        let psnr = r.ranking(PSNR).unwrap();
        assert_eq!((psnr.best.as_deref(), psnr.second.as_deref()), (Some("m3"), Some("m2")));
        let mse = r.ranking(MSE).unwrap();
        assert_eq!((mse.best.as_deref(), mse.second.as_deref()), (Some("m1"), Some("m2")));
        let md = render_markdown(&r);
        assert!(md.contains("| m3 | **3.00** | 3.00 |"), "{md}");
        assert!(md.contains("| m2 | <u>2.00</u> | <u>2.00</u> |"), "{md}");
        assert!(md.contains("| m1 | 1.00 | **1.00** |"), "{md}");
    }

    #[test]
    fn single_method_has_no_second() {
        let r = EvalReport::build(
            "one",
            vec!["a".into()],
            vec![("only".into(), vec![scores("a", &[(SSIM, 0.5)])])],
            &MetricRegistry::default(),
        )
        .unwrap();
        assert_eq!(r.ranking(SSIM).unwrap().second, None);
        assert!(!render_markdown(&r).contains("<u>"));
    }

    #[test]
    fn infinite_psnr_round_trips() {
        let r = EvalReport::build(
            "inf",
            vec!["a".into()],
            vec![("self".into(), vec![scores("a", &[(PSNR, f64::INFINITY)])])],
            &MetricRegistry::default(),
        )
        .unwrap();
        let json = r.to_json();
        assert!(json.contains("\"inf\""));
        let back = EvalReport::from_json(&json).unwrap();
        assert_eq!(back, r);
        assert!(render_markdown(&back).contains("**inf**"));
    }

    #[test]
    fn external_merge_and_coverage() {
        let base = three_methods();
        let mut csv = String::from("method,image,metric,value\n");
        for m in ["m1", "m2", "m3"] {
            csv.push_str(&format!("{m},a,LPIPS,0.{}\n", &m[1..]));
        }
        csv.push_str("m1,b,LPIPS,0.3\n");
        let r = merge_external_metrics(&base, &csv, &MetricRegistry::default()).unwrap();
        assert_eq!(r.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(), [PSNR, MSE, "LPIPS"]);
        assert_eq!(r.mean("m1", "LPIPS"), Some(0.2));
        let md = render_markdown(&r);
        assert!(md.contains("LPIPS↓"));
        assert!(md.contains("- LPIPS / m2: 1/2"), "{md}");
        assert!(!md.contains("LPIPS / m1"));

        let reg = MetricRegistry::default();
        let bad = |row: &str| merge_external_metrics(&base, &format!("method,image,metric,value\n{row}\n"), &reg);
        assert!(matches!(bad("m1,a,FOO,1"), Err(Error::UnknownMetric(n)) if n == "FOO"));
        assert!(bad("m1,a,LPIPS,abc").is_err());
        assert!(bad("m1,a,PSNR,30").is_err());
        assert!(bad("zz,a,LPIPS,1").is_err());
        assert!(bad("m1,zz,LPIPS,1").is_err());
        assert!(bad("m1,a,LPIPS,1\nm1,a,LPIPS,2").is_err());
    }

    #[test]
    fn renders_are_idempotent_through_json() {
        let r = three_methods();
        let back = EvalReport::from_json(&render_report(&r, ReportFormat::Json)).unwrap();
        for f in [ReportFormat::Markdown, ReportFormat::Json, ReportFormat::Csv] {
            assert_eq!(render_report(&back, f), render_report(&r, f));
        }
    }

    #[test]
    fn registry_and_formatting() {
        let mut reg = MetricRegistry::default();
        assert!(reg.register(MetricSpec::new(PSNR, Direction::HigherBetter, MetricSource::Native, 2)).is_err());
        reg.register(MetricSpec::new("UNI_cos", Direction::HigherBetter, MetricSource::External, 4))
            .unwrap();
        assert_eq!(reg.metrics().last().unwrap().name, "UNI_cos");
        assert_eq!(format_value(-0.00001, 2), "0.00");
        assert_eq!(format_value(24.0494, 2), "24.05");
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
    }
}
