//! Result tables and JSON documents.
//!
//! Shares and thresholds are written as decimal strings with six places;
//! internal values are never rounded before this point.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::concentration::{ConcentrationReport, ImpactRow};
use crate::error::{Error, Result};
use crate::model::{ClassLabel, Scope};
use crate::productivity::{BlendCurve, ProductivityCurve, TaSolution};
use crate::segmentation::{ClassCounts, PassSummary, StageTwoBands, StratificationResult};

pub const SHARE_DECIMALS_OUT: usize = 6;

pub fn format_share(x: f64) -> String {
    format!("{:.*}", SHARE_DECIMALS_OUT, x)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Schema(format!("{other:?}")),
    }
}

/// One line of a result table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub item_id: String,
    pub class: ClassLabel,
    pub assigning_pass: String,
    #[serde(rename = "slice_C_k")]
    pub slice_c_k: String,
}

pub fn result_rows(result: &StratificationResult) -> Vec<ResultRow> {
    result
        .items
        .iter()
        .map(|item| ResultRow {
            item_id: item.id.clone(),
            class: item.class,
            assigning_pass: result.assigning_pass(item).to_string(),
            slice_c_k: format_share(item.slice_share),
        })
        .collect()
}

/// `item_id,class,assigning_pass,slice_C_k`, one row per item.
pub fn write_result_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["item_id", "class", "assigning_pass", "slice_C_k"])
        .map_err(csv_err)?;
    for row in rows {
        out.write_record([
            row.item_id.as_str(),
            row.class.as_str(),
            row.assigning_pass.as_str(),
            row.slice_c_k.as_str(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `out.csv` -> `out.summary.json`.
pub fn summary_path(result_path: &Path) -> PathBuf {
    result_path.with_extension("summary.json")
}

/// Non-reproducible facts about a run. Kept under its own key in the
/// summary so everything else stays byte-stable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub generated_unix_seconds: u64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTwoView {
    pub mode: crate::segmentation::RenormalizeMode,
    pub removed_share: String,
    pub bands: &'static str,
    pub t_b: Option<String>,
    pub t_c: Option<String>,
    pub remainder_items: usize,
    pub remainder_value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceView {
    pub pass: String,
    pub slice: String,
    pub scope: Scope,
    pub n: usize,
    pub total_value: String,
    pub hhi: Option<f64>,
    pub t_a: String,
    pub coverage_before: Option<String>,
    pub underrepresented: bool,
    pub a_added: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryDoc {
    pub n: usize,
    pub total_value: String,
    pub a_value: String,
    pub a_coverage: Option<String>,
    pub class_counts: ClassCounts,
    pub passes: Vec<PassSummary>,
    pub stage_two: StageTwoView,
    pub slices: Vec<SliceView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_metadata: Option<RunMetadata>,
}

pub fn summary_doc(result: &StratificationResult, run_metadata: Option<RunMetadata>) -> SummaryDoc {
    let st = &result.stage_two;
    let (bands, t_b, t_c) = match st.bands {
        StageTwoBands::Full { t_b, t_c } => {
            ("full", Some(format_share(t_b)), Some(format_share(t_c)))
        }
        StageTwoBands::CdOnly { t_c } => ("cd_only", None, Some(format_share(t_c))),
        StageTwoBands::AllD => ("all_d", None, None),
    };
    SummaryDoc {
        n: result.items.len(),
        total_value: result.total_value.clone(),
        a_value: result.a_value.clone(),
        a_coverage: result.a_coverage.map(format_share),
        class_counts: result.class_counts.clone(),
        passes: result.passes.clone(),
        stage_two: StageTwoView {
            mode: st.mode,
            removed_share: format_share(st.removed_share),
            bands,
            t_b,
            t_c,
            remainder_items: st.remainder_items,
            remainder_value: st.remainder_value.clone(),
        },
        slices: result
            .groups
            .iter()
            .map(|g| SliceView {
                pass: g.pass.clone(),
                slice: g.key.label(),
                scope: g.key.scope,
                n: g.n,
                total_value: g.total_value.clone(),
                hhi: g.h,
                t_a: format_share(g.t_a),
                coverage_before: g.coverage_before.map(format_share),
                underrepresented: g.underrepresented,
                a_added: g.added,
            })
            .collect(),
        run_metadata,
    }
}

pub fn write_summary_json<W: Write>(doc: &SummaryDoc, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, doc).map_err(|e| Error::Io(e.into()))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Full stratification document: every item row plus the summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratificationDoc {
    pub items: Vec<ResultRow>,
    pub summary: SummaryDoc,
}

pub fn stratification_doc(result: &StratificationResult) -> StratificationDoc {
    StratificationDoc {
        items: result_rows(result),
        summary: summary_doc(result, None),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRowView {
    pub slice: String,
    pub filter: std::collections::BTreeMap<String, String>,
    pub n: usize,
    pub total_value: String,
    pub hhi: f64,
    pub hhi_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationDoc {
    pub rows: Vec<ConcentrationRowView>,
    pub uniform_item_count: bool,
    pub zero_total_slices: usize,
}

pub fn concentration_doc(report: &ConcentrationReport) -> ConcentrationDoc {
    ConcentrationDoc {
        rows: report
            .rows
            .iter()
            .map(|r| ConcentrationRowView {
                slice: r.key.label(),
                filter: r.key.filter.clone(),
                n: r.index.n,
                total_value: r.total_value.clone(),
                hhi: r.index.h,
                hhi_floor: r.index.floor(),
            })
            .collect(),
        uniform_item_count: report.uniform_item_count,
        zero_total_slices: report.zero_total_slices,
    }
}

/// `slice,n,total_value,hhi,hhi_floor`.
pub fn write_concentration_csv<W: Write>(report: &ConcentrationReport, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["slice", "n", "total_value", "hhi", "hhi_floor"])
        .map_err(csv_err)?;
    for r in &report.rows {
        out.write_record([
            r.key.label(),
            r.index.n.to_string(),
            r.total_value.clone(),
            format_share(r.index.h),
            format_share(r.index.floor()),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpactView {
    pub t_a: String,
    pub a_count: usize,
    pub a_value: String,
    pub a_share: String,
    pub entering: Vec<String>,
    pub leaving: Vec<String>,
}

pub fn impact_views(rows: &[ImpactRow]) -> Vec<ImpactView> {
    rows.iter()
        .map(|r| ImpactView {
            t_a: format_share(r.t_a),
            a_count: r.a_count,
            a_value: r.a_value.clone(),
            a_share: format_share(r.a_share),
            entering: r.entering.clone(),
            leaving: r.leaving.clone(),
        })
        .collect()
}

/// `t_a,a_count,a_value,a_share,entering,leaving`; id lists are `;`-joined.
pub fn write_impact_csv<W: Write>(rows: &[ImpactRow], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "t_a", "a_count", "a_value", "a_share", "entering", "leaving",
    ])
    .map_err(csv_err)?;
    for v in impact_views(rows) {
        out.write_record([
            v.t_a,
            v.a_count.to_string(),
            v.a_value,
            v.a_share,
            v.entering.join(";"),
            v.leaving.join(";"),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductivityDoc {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub t0: f64,
    pub p_star: usize,
    pub t_a_star: Option<String>,
    pub residual: f64,
}

pub fn productivity_doc(
    curve: &ProductivityCurve,
    blend: &BlendCurve,
    solution: Option<&TaSolution>,
) -> ProductivityDoc {
    ProductivityDoc {
        s: curve.s().to_vec(),
        t: blend.t.clone(),
        t0: blend.t0,
        p_star: blend.p_star,
        t_a_star: blend.t_a_star.map(format_share),
        residual: solution.map_or_else(
            || curve.values()[blend.p_star - 1].to_f64() - blend.t[blend.p_star - 1],
            |s| s.residual,
        ),
    }
}

/// `p,value,S_p,T_p`.
pub fn write_productivity_csv<W: Write>(
    curve: &ProductivityCurve,
    blend: &BlendCurve,
    w: W,
) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["p", "value", "S_p", "T_p"])
        .map_err(csv_err)?;
    for (i, (s, t)) in curve.s().iter().zip(&blend.t).enumerate() {
        out.write_record([
            (i + 1).to_string(),
            curve.values()[i].to_string(),
            format_share(*s),
            format_share(*t),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
