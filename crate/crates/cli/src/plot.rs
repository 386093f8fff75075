//! Gnuplot scripts and whitespace-separated data files for region samples.

use pareto_region::region::{Provenance, RegionRow, RegionSample};

use crate::error::CliError;

pub struct PlotInput {
    pub label: String,
    pub sample: RegionSample,
}

pub struct PlotFiles {
    pub script: String,
    /// `(file name, contents)` per input.
    pub data: Vec<(String, String)>,
}

/// Sum rate from the SINR columns when present, otherwise the sum of the
/// performance values.
fn sum_rate(row: &RegionRow) -> f64 {
    match &row.sinr {
        Some(s) => s.iter().map(|x| (1.0 + x).log2()).sum(),
        None => row.point.iter().sum(),
    }
}

fn file_stem(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() { "data".into() } else { s }
}

fn is_curve(sample: &RegionSample) -> bool {
    !sample.rows.is_empty() && sample.rows.iter().all(|r| r.tag == Provenance::ImplicitTrace)
}

fn data_file(sample: &RegionSample) -> String {
    let k = sample.num_users;
    let mut out = String::new();
    let cols: Vec<String> = (1..=k).map(|i| format!("g_{i}")).collect();
    out.push_str(&format!("# {} sum_rate\n", cols.join(" ")));
    for row in &sample.rows {
        for v in &row.point {
            out.push_str(&format!("{v} "));
        }
        out.push_str(&format!("{}\n", sum_rate(row)));
    }
    out
}

pub fn render(inputs: &[PlotInput], image: &str) -> Result<PlotFiles, CliError> {
    let Some(first) = inputs.first() else {
        return Err(CliError::Validation("plot needs at least one input".into()));
    };
    let k = first.sample.num_users;
    if inputs.iter().any(|i| i.sample.num_users != k) {
        return Err(CliError::Validation("plot inputs differ in the number of users".into()));
    }
    if !(2..=3).contains(&k) {
        return Err(CliError::Validation(format!("can only plot 2 or 3 users, got {k}")));
    }

    let mut data = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for input in inputs {
        let stem = file_stem(&input.label);
        let mut name = format!("{stem}.dat");
        let mut n = 2;
        while names.contains(&name) {
            name = format!("{stem}-{n}.dat");
            n += 1;
        }
        names.push(name.clone());
        data.push((name, data_file(&input.sample)));
    }

    let mut script = String::new();
    script.push_str("set terminal pngcairo size 900,700\n");
    script.push_str(&format!("set output '{image}'\n"));
    script.push_str("set key outside right\n");
    script.push_str("set xlabel 'g_1'\nset ylabel 'g_2'\n");
    let mut plots = Vec::new();
    if k == 2 {
        script.push_str("set xrange [0:*]\nset yrange [0:*]\n");
        for (input, name) in inputs.iter().zip(&names) {
            let style = if is_curve(&input.sample) { "with linespoints pt 7 ps 0.4" } else { "with dots" };
            plots.push(format!("'{name}' using 1:2 {style} title '{}'", escape(&input.label)));
        }
        script.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    } else {
        script.push_str("set zlabel 'g_3'\nset view 60,45\nset cblabel 'sum rate'\nset palette rgbformulae 33,13,10\n");
        for (input, name) in inputs.iter().zip(&names) {
            plots.push(format!(
                "'{name}' using 1:2:3:4 with points pt 7 ps 0.3 palette title '{}'",
                escape(&input.label)
            ));
        }
        script.push_str(&format!("splot {}\n", plots.join(", \\\n      ")));
    }
    Ok(PlotFiles { script, data })
}

fn escape(s: &str) -> String {
    s.replace('\'', "''")
}
