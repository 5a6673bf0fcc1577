//! Word-level saliency: pooling embedding gradients into one signed score per
//! token, ranking against gold terms, and heatmap rendering.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Label};
use crate::error::{Error, Result};
use crate::rnn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Σ grad², the squared gradient norm.
    L2,
    /// Σ grad
    Sum,
    /// Σ emb ⊙ grad
    Dot,
}

impl Pooling {
    pub const ALL: [Pooling; 3] = [Pooling::L2, Pooling::Sum, Pooling::Dot];

    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::L2 => "l2",
            Pooling::Sum => "sum",
            Pooling::Dot => "dot",
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l2" => Ok(Pooling::L2),
            "sum" => Ok(Pooling::Sum),
            "dot" => Ok(Pooling::Dot),
            other => Err(format!("unknown pooling '{other}' (expected l2, sum or dot)")),
        }
    }
}

/// One signed importance score per token of a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub doc_id: String,
    pub method: Pooling,
    pub target_class: usize,
    pub scores: Vec<f64>,
}

/// Pools a T × d gradient matrix into T scores.
pub fn pool(grads: &Array2<f64>, embeddings: &Array2<f64>, method: Pooling) -> Result<Vec<f64>> {
    if grads.dim() != embeddings.dim() {
        return Err(Error::ShapeMismatch(format!(
            "gradients {:?} vs embeddings {:?}",
            grads.dim(),
            embeddings.dim()
        )));
    }
    let scores = grads
        .rows()
        .into_iter()
        .zip(embeddings.rows())
        .map(|(g, e)| match method {
            Pooling::L2 => g.iter().map(|v| v * v).sum(),
            Pooling::Sum => g.sum(),
            Pooling::Dot => {
                let mut acc = 0.0;
                Zip::from(&g).and(&e).for_each(|a, b| acc += a * b);
                acc
            }
        })
        .collect();
    Ok(scores)
}

/// Saliency maps of one document under several pooling methods, sharing a
/// single gradient computation.
pub fn saliency_maps(
    net: &Network<'_>,
    doc_id: &str,
    seq: &[u32],
    methods: &[Pooling],
) -> Result<Vec<SaliencyMap>> {
    let trace = net.forward(seq)?;
    let grads = net.trace_gradients(&trace);
    methods
        .iter()
        .map(|&method| {
            Ok(SaliencyMap {
                doc_id: doc_id.to_owned(),
                method,
                target_class: grads.target_class,
                scores: pool(&grads.rows, &trace.inputs, method)?,
            })
        })
        .collect()
}

/// Token positions ordered by decreasing |score|; ties keep the earlier
/// position first.
pub fn rank_by_magnitude(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].abs().total_cmp(&scores[a].abs()).then(a.cmp(&b)));
    order
}

/// Share of the gold positions among the `|gold|` highest-|score| tokens.
pub fn topk_gold_accuracy(scores: &[f64], gold: &BTreeSet<usize>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyGoldSet);
    }
    let k = gold.len();
    let hits = rank_by_magnitude(scores)
        .into_iter()
        .take(k)
        .filter(|p| gold.contains(p))
        .count();
    Ok(hits as f64 / k as f64)
}

/// Mean top-k gold accuracy over the documents with a non-empty gold set.
/// Returns the mean and the number of documents averaged.
pub fn mean_topk_gold_accuracy<'a, I>(pairs: I) -> Result<(f64, usize)>
where
    I: IntoIterator<Item = (&'a SaliencyMap, &'a Document)>,
{
    let mut total = 0.0;
    let mut count = 0;
    for (map, doc) in pairs {
        let gold = doc.flat_gold();
        if gold.is_empty() {
            continue;
        }
        total += topk_gold_accuracy(&map.scores, &gold)?;
        count += 1;
    }
    Ok((if count == 0 { 0.0 } else { total / count as f64 }, count))
}

pub fn write_saliency_dump<W: Write>(mut out: W, maps: &[SaliencyMap]) -> Result<()> {
    for map in maps {
        serde_json::to_writer(&mut out, map).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a saliency dump. Lines starting with `#` are provenance comments.
pub fn read_saliency_dump<R: BufRead>(input: R) -> Result<Vec<SaliencyMap>> {
    let mut maps = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        maps.push(serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(maps)
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Token background colour: blue for positive scores, red for negative, with
/// opacity |score| / max |score| over the document.
pub fn token_style(score: f64, max_abs: f64) -> String {
    if score == 0.0 || max_abs == 0.0 {
        return "background-color: transparent".to_owned();
    }
    let alpha = (score.abs() / max_abs).min(1.0);
    let rgb = if score > 0.0 { "0, 0, 255" } else { "255, 0, 0" };
    format!("background-color: rgba({rgb}, {alpha:.3})")
}

/// Standalone XHTML page with one coloured span per token. Provenance lines
/// are embedded as a comment.
pub fn render_heatmap(map: &SaliencyMap, document: &Document, provenance: &[String]) -> Result<String> {
    if map.scores.len() != document.token_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores for {} tokens",
            map.scores.len(),
            document.token_count()
        )));
    }
    let max_abs = map.scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let target = Label::from_index(map.target_class)
        .map(Label::as_str)
        .unwrap_or("unknown");
    let title = escape(&format!("{} ({} pooling)", document.id, map.method));

    let mut html = String::new();
    html.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    html.push_str(
        "<!DOCTYPE html PUBLIC \"-//W3C//DTD XHTML 1.0 Strict//EN\" \
         \"http://www.w3.org/TR/xhtml1/DTD/xhtml1-strict.dtd\">\n",
    );
    if !provenance.is_empty() {
        html.push_str("<!--\n");
        for line in provenance {
            // "--" may not appear inside an XML comment
            let _ = writeln!(html, "{}", line.replace("--", "- -"));
        }
        html.push_str("-->\n");
    }
    html.push_str("<html xmlns=\"http://www.w3.org/1999/xhtml\" xml:lang=\"en\" lang=\"en\">\n");
    let _ = writeln!(html, "<head>\n<title>{title}</title>");
    html.push_str(
        "<style type=\"text/css\">span.tok { padding: 0 2px; } p { line-height: 1.8; }</style>\n",
    );
    html.push_str("</head>\n<body>\n");
    let _ = writeln!(
        html,
        "<h1>{title}</h1>\n<p>label: {} / explained class: {}</p>",
        document.label,
        escape(target)
    );
    let mut scores = map.scores.iter();
    for sentence in &document.sentences {
        html.push_str("<p>");
        for (i, token) in sentence.iter().enumerate() {
            let score = *scores.next().expect("length checked");
            if i > 0 {
                html.push(' ');
            }
            let _ = write!(
                html,
                "<span class=\"tok\" title=\"{score:.6}\" style=\"{}\">{}</span>",
                token_style(score, max_abs),
                escape(token)
            );
        }
        html.push_str("</p>\n");
    }
    html.push_str("</body>\n</html>\n");
    Ok(html)
}
