use std::str::FromStr;

use super::EntryDoc;
use crate::compartments::CompartmentReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Rank,
    Function,
    Weight,
    BlockWeight,
    CallsWeight,
    ProfileCnt,
    Label,
    Conditional,
    Compartment,
    Input,
    Solution,
    Status,
    Id,
}

impl Column {
    pub const DEFAULT: [Column; 11] = [
        Column::Rank,
        Column::Function,
        Column::Weight,
        Column::BlockWeight,
        Column::CallsWeight,
        Column::ProfileCnt,
        Column::Label,
        Column::Conditional,
        Column::Compartment,
        Column::Input,
        Column::Solution,
    ];

    const ALL: [Column; 13] = [
        Column::Rank,
        Column::Function,
        Column::Weight,
        Column::BlockWeight,
        Column::CallsWeight,
        Column::ProfileCnt,
        Column::Label,
        Column::Conditional,
        Column::Compartment,
        Column::Input,
        Column::Solution,
        Column::Status,
        Column::Id,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Column::Rank => "Rank",
            Column::Function => "Function",
            Column::Weight => "Weight",
            Column::BlockWeight => "Block Weight",
            Column::CallsWeight => "Calls Weight",
            Column::ProfileCnt => "Profile Cnt",
            Column::Label => "Label",
            Column::Conditional => "Conditional",
            Column::Compartment => "Compartment",
            Column::Input => "Input",
            Column::Solution => "Solution",
            Column::Status => "Status",
            Column::Id => "Id",
        }
    }

    fn numeric(self) -> bool {
        matches!(
            self,
            Column::Rank
                | Column::Weight
                | Column::BlockWeight
                | Column::CallsWeight
                | Column::ProfileCnt
        )
    }

    fn cell(self, row: &EntryDoc) -> String {
        match self {
            Column::Rank => row.rank.to_string(),
            Column::Function => row.function.clone(),
            Column::Weight => row.weight.to_string(),
            Column::BlockWeight => row.block_weight.to_string(),
            Column::CallsWeight => row.calls_weight.to_string(),
            Column::ProfileCnt => row.profile_cnt.to_string(),
            Column::Label => row.label.clone(),
            Column::Conditional => row.conditional.clone(),
            Column::Compartment => row.compartment.clone(),
            Column::Input => row.input.clone(),
            Column::Solution => row.solution.clone(),
            Column::Status => row.status.to_string(),
            Column::Id => row.id.clone(),
        }
    }
}

impl FromStr for Column {
    type Err = Error;

    /// Accepts the header text or its snake_case form, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(' ', "_");
        Column::ALL
            .into_iter()
            .find(|c| c.header().to_ascii_lowercase().replace(' ', "_") == norm)
            .ok_or_else(|| Error::UnknownColumn(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct RenderOptions {
    pub format: Format,
    pub columns: Vec<Column>,
    /// Longest cell in table output; longer cells are cut with "...".
    pub max_width: Option<usize>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            format: Format::Table,
            columns: Column::DEFAULT.to_vec(),
            max_width: None,
        }
    }
}

impl RenderOptions {
    pub fn with_format(format: Format) -> Self {
        RenderOptions {
            format,
            ..Self::default()
        }
    }

    /// Parses a comma-separated column list.
    pub fn parse_columns(list: &str) -> Result<Vec<Column>> {
        list.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect()
    }
}

/// Renders the report. Table and CSV show locked entries in rank order; JSON
/// is the full export document.
pub fn render(report: &CompartmentReport, opts: &RenderOptions) -> Result<String> {
    match opts.format {
        Format::Json => Ok(report.to_json()),
        Format::Table => Ok(render_table(report, opts)),
        Format::Csv => render_csv(report, &opts.columns),
    }
}

fn locked_rows(report: &CompartmentReport) -> Vec<EntryDoc> {
    report.rows().into_iter().filter(|r| r.rank > 0).collect()
}

fn clip(cell: String, max: Option<usize>) -> String {
    match max {
        Some(max) if cell.chars().count() > max => {
            let keep = max.saturating_sub(3);
            let mut s: String = cell.chars().take(keep).collect();
            s.push_str(&"..."[..max.min(3)]);
            s
        }
        _ => cell,
    }
}

fn render_table(report: &CompartmentReport, opts: &RenderOptions) -> String {
    let rows: Vec<Vec<String>> = locked_rows(report)
        .iter()
        .map(|r| {
            opts.columns
                .iter()
                .map(|c| clip(c.cell(r), opts.max_width))
                .collect()
        })
        .collect();
    let headers: Vec<String> = opts
        .columns
        .iter()
        .map(|c| clip(c.header().to_string(), opts.max_width))
        .collect();
    let widths: Vec<usize> = (0..opts.columns.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].chars().count())
                .chain(std::iter::once(headers[i].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();

    let line = |cells: &[String]| -> String {
        let mut out = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let pad = widths[i] - cell.chars().count();
            if opts.columns[i].numeric() {
                out.extend(std::iter::repeat_n(' ', pad));
                out.push_str(cell);
            } else {
                out.push_str(cell);
                out.extend(std::iter::repeat_n(' ', pad));
            }
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    };

    let mut out = line(&headers);
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

fn render_csv(report: &CompartmentReport, columns: &[Column]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(columns.iter().map(|c| c.header()))?;
    for r in locked_rows(report) {
        w.write_record(columns.iter().map(|c| c.cell(&r)))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Invariant(format!("csv flush: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
}
