//! Lineage records, ancestry walks and coalescent trees.
//!
//! Ancestry is tracked by particle id: a record `child ← parent` at time `s`
//! means that just after `s` the particle `child` descends from what `parent`
//! was just before `s`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineageTag {
    /// Replacement: the child keeps its id and level and takes the parent's lineage.
    Replacement,
    /// A new particle created by a birth.
    Birth,
    /// The parent of a discrete birth continuing at the lowest new level.
    Relocation,
    /// Arrival from outside; no parent.
    Immigration,
    /// Spatial Λ-Fleming–Viot replacement.
    Slfv,
}

impl LineageTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            LineageTag::Replacement => "replacement",
            LineageTag::Birth => "birth",
            LineageTag::Relocation => "relocation",
            LineageTag::Immigration => "immigration",
            LineageTag::Slfv => "slfv",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "replacement" => LineageTag::Replacement,
            "birth" => LineageTag::Birth,
            "relocation" => LineageTag::Relocation,
            "immigration" => LineageTag::Immigration,
            "slfv" => LineageTag::Slfv,
            _ => return Err(Error::Parse(format!("unknown lineage tag {s:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub time: f64,
    pub child: u64,
    pub parent: Option<u64>,
    pub child_level: f64,
    pub parent_level: Option<f64>,
    pub tag: LineageTag,
}

impl LineageRecord {
    pub const TSV_HEADER: &'static str = "time\tchild\tparent\tchild_level\tparent_level\ttag";

    pub fn to_tsv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "NA".into());
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.time,
            self.child,
            opt(self.parent.map(|p| p.to_string())),
            self.child_level,
            opt(self.parent_level.map(|p| p.to_string())),
            self.tag.as_str()
        )
    }

    pub fn from_tsv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::Parse(format!("lineage row needs 6 fields: {line}")));
        }
        let perr = |e: &dyn std::fmt::Display| Error::Parse(format!("{line}: {e}"));
        let num = |s: &str| s.parse::<f64>().map_err(|e| perr(&e));
        Ok(LineageRecord {
            time: num(f[0])?,
            child: f[1].parse().map_err(|e| perr(&e))?,
            parent: if f[2] == "NA" { None } else { Some(f[2].parse().map_err(|e| perr(&e))?) },
            child_level: num(f[3])?,
            parent_level: if f[4] == "NA" { None } else { Some(num(f[4])?) },
            tag: LineageTag::parse(f[5])?,
        })
    }

    /// Records that should satisfy `parent_level < child_level`.
    pub fn is_lookdown(&self) -> bool {
        self.parent.is_some() && self.tag != LineageTag::Relocation
    }
}

/// Records in time order together with the interval they cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineageLog {
    pub start: f64,
    pub end: f64,
    pub records: Vec<LineageRecord>,
}

impl LineageLog {
    pub fn new(start: f64) -> Self {
        LineageLog { start, end: start, records: Vec::new() }
    }

    /// Appends a later log. The two must abut.
    pub fn append(&mut self, other: &LineageLog) -> Result<()> {
        if other.start != self.end {
            return Err(Error::IncompleteLog { from: self.start, to: other.end, start: self.end, end: other.start });
        }
        self.records.extend_from_slice(&other.records);
        self.end = other.end;
        Ok(())
    }

    fn check_cover(&self, r: f64, t: f64) -> Result<()> {
        if r > t {
            return Err(Error::InvalidParameter(format!("r = {r} after t = {t}")));
        }
        if r < self.start || t > self.end {
            return Err(Error::IncompleteLog { from: r, to: t, start: self.start, end: self.end });
        }
        Ok(())
    }

    /// Indices of records with time in `(r, t]`.
    fn window(&self, r: f64, t: f64) -> std::ops::Range<usize> {
        let lo = self.records.partition_point(|x| x.time <= r);
        let hi = self.records.partition_point(|x| x.time <= t);
        lo..hi.max(lo)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("#start\t{}\tend\t{}\n{}\n", self.start, self.end, LineageRecord::TSV_HEADER);
        for r in &self.records {
            s.push_str(&r.to_tsv_row());
            s.push('\n');
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::Parse("empty lineage log".into()))?;
        let h: Vec<&str> = head.trim_start_matches('#').split('\t').collect();
        if h.len() != 4 || h[0] != "start" {
            return Err(Error::Parse(format!("bad lineage header: {head}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let mut log = LineageLog::new(num(h[1])?);
        log.end = num(h[3])?;
        lines.next();
        for line in lines.filter(|l| !l.is_empty()) {
            log.records.push(LineageRecord::from_tsv_row(line)?);
        }
        Ok(log)
    }

    /// First record violating the lookdown direction, if any.
    pub fn direction_violation(&self) -> Option<&LineageRecord> {
        self.records.iter().find(|r| r.is_lookdown() && !(r.parent_level.unwrap() < r.child_level))
    }
}

/// Ancestor at time `r` of the particle `id` alive at time `t`.
///
/// `None` when the lineage enters by immigration after `r`.
pub fn ancestor_index(log: &LineageLog, id: u64, r: f64, t: f64) -> Result<Option<u64>> {
    log.check_cover(r, t)?;
    let mut cur = id;
    for rec in log.records[log.window(r, t)].iter().rev() {
        if rec.child == cur {
            match rec.parent {
                Some(p) => cur = p,
                None => return Ok(None),
            }
        }
    }
    Ok(Some(cur))
}

/// Level-arithmetic form of the ancestor walk for models with fixed levels:
/// follows the lineage by level instead of id. Returns the ancestor's level.
pub fn ancestor_level(log: &LineageLog, level: f64, r: f64, t: f64) -> Result<Option<f64>> {
    log.check_cover(r, t)?;
    let mut cur = level;
    for rec in log.records[log.window(r, t)].iter().rev() {
        if rec.child_level == cur {
            match rec.parent_level {
                Some(p) => cur = p,
                None => return Ok(None),
            }
        }
    }
    Ok(Some(cur))
}

/// `J_i(r)`: 0-based rank, among the fixed `levels`, of the ancestor of the
/// particle of rank `i` at time `t`.
pub fn ancestor_rank(log: &LineageLog, levels: &[f64], i: usize, r: f64, t: f64) -> Result<Option<usize>> {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let Some(&u) = sorted.get(i) else {
        return Err(Error::InvalidParameter(format!("rank {i} out of range")));
    };
    Ok(ancestor_level(log, u, r, t)?.and_then(|a| sorted.iter().position(|&v| v == a)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeNode {
    /// Sampling time for leaves, merge time for internal nodes.
    pub time: f64,
    pub leaf: Option<u64>,
    pub children: Vec<usize>,
    /// Smallest leaf id below this node.
    pub min_leaf: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AncestryTree {
    pub sample_time: f64,
    /// Lineages still separate here were traced back to the log start or to an immigration.
    pub horizon: f64,
    pub nodes: Vec<TreeNode>,
    /// Root nodes ordered by smallest leaf id, each with the time its lineage was last traced to.
    pub roots: Vec<(usize, f64)>,
}

impl AncestryTree {
    pub fn leaves(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.nodes.iter().filter_map(|n| n.leaf).collect();
        v.sort();
        v
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.leaf.is_none())
    }

    fn parent_of(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                p[c] = Some(i);
            }
        }
        p
    }

    fn leaf_node(&self, id: u64) -> Option<usize> {
        self.nodes.iter().position(|n| n.leaf == Some(id))
    }

    /// Time of the most recent common ancestor of two leaves; `None` if they never merge.
    pub fn pair_merge_time(&self, a: u64, b: u64) -> Option<f64> {
        let parent = self.parent_of();
        let (mut x, mut y) = (self.leaf_node(a)?, self.leaf_node(b)?);
        let mut above_a = vec![false; self.nodes.len()];
        loop {
            above_a[x] = true;
            match parent[x] {
                Some(p) => x = p,
                None => break,
            }
        }
        loop {
            if above_a[y] {
                return Some(self.nodes[y].time);
            }
            y = parent[y]?;
        }
    }

    /// Tree restricted to `ids`, with unary nodes collapsed.
    pub fn induced(&self, ids: &[u64]) -> AncestryTree {
        let mut out = AncestryTree { sample_time: self.sample_time, horizon: self.horizon, nodes: Vec::new(), roots: Vec::new() };
        let keep: std::collections::HashSet<u64> = ids.iter().copied().collect();
        fn build(t: &AncestryTree, n: usize, keep: &std::collections::HashSet<u64>, out: &mut AncestryTree) -> Option<usize> {
            let node = &t.nodes[n];
            if let Some(id) = node.leaf {
                if !keep.contains(&id) {
                    return None;
                }
                out.nodes.push(TreeNode { time: node.time, leaf: Some(id), children: vec![], min_leaf: id });
                return Some(out.nodes.len() - 1);
            }
            let mut kids: Vec<usize> = node.children.iter().filter_map(|&c| build(t, c, keep, out)).collect();
            match kids.len() {
                0 => None,
                1 => Some(kids[0]),
                _ => {
                    kids.sort_by_key(|&k| out.nodes[k].min_leaf);
                    let min_leaf = out.nodes[kids[0]].min_leaf;
                    out.nodes.push(TreeNode { time: node.time, leaf: None, children: kids, min_leaf });
                    Some(out.nodes.len() - 1)
                }
            }
        }
        for &(r, top) in &self.roots {
            if let Some(n) = build(self, r, &keep, &mut out) {
                out.roots.push((n, top));
            }
        }
        // a subsample can reorder the roots by smallest leaf
        out.roots.sort_by_key(|&(n, _)| out.nodes[n].min_leaf);
        out
    }
}

/// Reconstructs the genealogy of `sample_ids` (alive at `t`) from the log.
/// Lineages hit by one event merge into one node, so multifurcations appear
/// whenever three or more sampled lineages share an event.
pub fn extract_tree(log: &LineageLog, sample_ids: &[u64], t: f64) -> Result<AncestryTree> {
    log.check_cover(log.start, t)?;
    let mut ids = sample_ids.to_vec();
    ids.sort();
    ids.dedup();
    let mut tree = AncestryTree { sample_time: t, horizon: log.start, nodes: Vec::new(), roots: Vec::new() };
    // current particle id → node carried by that lineage
    let mut active: BTreeMap<u64, usize> = BTreeMap::new();
    for &id in &ids {
        tree.nodes.push(TreeNode { time: t, leaf: Some(id), children: vec![], min_leaf: id });
        active.insert(id, tree.nodes.len() - 1);
    }
    let range = log.window(log.start, t);
    let recs = &log.records[range];
    let mut end = recs.len();
    while end > 0 && active.len() > 0 {
        let time = recs[end - 1].time;
        let mut begin = end;
        while begin > 0 && recs[begin - 1].time == time {
            begin -= 1;
        }
        let event = &recs[begin..end];
        end = begin;
        let moves: HashMap<u64, Option<u64>> =
            event.iter().filter(|r| active.contains_key(&r.child)).map(|r| (r.child, r.parent)).collect();
        if moves.is_empty() {
            continue;
        }
        let mut next: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (&id, &node) in &active {
            match moves.get(&id) {
                Some(Some(p)) => next.entry(*p).or_default().push(node),
                Some(None) => tree.roots.push((node, time)),
                None => next.entry(id).or_default().push(node),
            }
        }
        active.clear();
        for (id, mut group) in next {
            let node = if group.len() == 1 {
                group[0]
            } else {
                group.sort_by_key(|&n| tree.nodes[n].min_leaf);
                let min_leaf = tree.nodes[group[0]].min_leaf;
                tree.nodes.push(TreeNode { time, leaf: None, children: group, min_leaf });
                tree.nodes.len() - 1
            };
            active.insert(id, node);
        }
    }
    for &node in active.values() {
        tree.roots.push((node, log.start));
    }
    tree.roots.sort_by_key(|&(n, _)| tree.nodes[n].min_leaf);
    Ok(tree)
}

/// Newick text for the tree, one line per root, leaves labelled `p<id>`.
pub fn export_newick(tree: &AncestryTree) -> String {
    fn write(t: &AncestryTree, n: usize, out: &mut String) {
        let node = &t.nodes[n];
        if let Some(id) = node.leaf {
            let _ = write!(out, "p{id}");
            return;
        }
        out.push('(');
        for (i, &c) in node.children.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write(t, c, out);
            let _ = write!(out, ":{}", t.nodes[c].time - node.time);
        }
        out.push(')');
    }
    let mut lines = Vec::new();
    for &(r, _) in &tree.roots {
        let mut s = String::new();
        write(tree, r, &mut s);
        s.push(';');
        lines.push(s);
    }
    lines.join("\n")
}

/// A parsed Newick tree.
#[derive(Clone, Debug, PartialEq)]
pub struct NewickNode {
    pub label: Option<String>,
    pub length: Option<f64>,
    pub children: Vec<NewickNode>,
}

impl NewickNode {
    pub fn leaf_labels(&self) -> Vec<String> {
        if self.children.is_empty() {
            return self.label.iter().cloned().collect();
        }
        self.children.iter().flat_map(|c| c.leaf_labels()).collect()
    }

    /// Height of every leaf below this node, summing branch lengths.
    pub fn leaf_depths(&self) -> Vec<(String, f64)> {
        fn go(n: &NewickNode, acc: f64, out: &mut Vec<(String, f64)>) {
            let here = acc + n.length.unwrap_or(0.0);
            if n.children.is_empty() {
                out.push((n.label.clone().unwrap_or_default(), here));
            }
            for c in &n.children {
                go(c, here, out);
            }
        }
        let mut out = Vec::new();
        go(self, 0.0, &mut out);
        out
    }
}

/// Parses a single Newick tree terminated by `;`.
pub fn parse_newick(text: &str) -> Result<NewickNode> {
    struct P<'a> {
        s: &'a [u8],
        i: usize,
    }
    impl P<'_> {
        fn err<T>(&self, m: &str) -> Result<T> {
            Err(Error::Parse(format!("newick at byte {}: {m}", self.i)))
        }
        fn peek(&self) -> Option<u8> {
            self.s.get(self.i).copied()
        }
        fn token(&mut self) -> &str {
            let st = self.i;
            while let Some(c) = self.peek() {
                if b"(),:;".contains(&c) || c.is_ascii_whitespace() {
                    break;
                }
                self.i += 1;
            }
            std::str::from_utf8(&self.s[st..self.i]).unwrap_or("")
        }
        fn node(&mut self) -> Result<NewickNode> {
            let mut children = Vec::new();
            if self.peek() == Some(b'(') {
                self.i += 1;
                loop {
                    children.push(self.node()?);
                    match self.peek() {
                        Some(b',') => self.i += 1,
                        Some(b')') => {
                            self.i += 1;
                            break;
                        }
                        _ => return self.err("expected ',' or ')'"),
                    }
                }
            }
            let l = self.token().to_string();
            let label = (!l.is_empty()).then_some(l);
            let mut length = None;
            if self.peek() == Some(b':') {
                self.i += 1;
                let tok = self.token().to_string();
                match tok.parse::<f64>() {
                    Ok(v) => length = Some(v),
                    Err(_) => return self.err(&format!("bad branch length {tok:?}")),
                }
            }
            if children.is_empty() && label.is_none() {
                return self.err("empty leaf");
            }
            Ok(NewickNode { label, length, children })
        }
    }
    let text = text.trim();
    let mut p = P { s: text.as_bytes(), i: 0 };
    let root = p.node()?;
    if p.peek() != Some(b';') || p.i + 1 != text.len() {
        return p.err("expected final ';'");
    }
    Ok(root)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoalescenceSummary {
    pub n_trees: usize,
    /// Observed pairwise coalescence times, measured backward from sampling.
    pub pair_times: Vec<f64>,
    pub n_censored: usize,
    /// Exponential rate MLE with right-censoring.
    pub rate_mle: f64,
    pub rate_ci: (f64, f64),
    pub multifurcation_fraction: f64,
    /// All observed merges happened at a single time.
    pub degenerate: bool,
}

pub fn coalescence_statistics(trees: &[AncestryTree]) -> Result<CoalescenceSummary> {
    if trees.is_empty() {
        return Err(Error::InvalidParameter("no trees".into()));
    }
    let mut times = Vec::new();
    let mut censored = Vec::new();
    let (mut internal, mut multi) = (0usize, 0usize);
    for t in trees {
        let leaves = t.leaves();
        for (i, &a) in leaves.iter().enumerate() {
            for &b in &leaves[i + 1..] {
                match t.pair_merge_time(a, b) {
                    Some(s) => times.push(t.sample_time - s),
                    None => censored.push(t.sample_time - t.horizon),
                }
            }
        }
        for n in t.internal_nodes() {
            internal += 1;
            if n.children.len() > 2 {
                multi += 1;
            }
        }
    }
    let exposure: f64 = times.iter().sum::<f64>() + censored.iter().sum::<f64>();
    let n_obs = times.len() as f64;
    let rate = if exposure > 0.0 { n_obs / exposure } else { f64::NAN };
    let half = if n_obs > 0.0 { 1.96 * rate / n_obs.sqrt() } else { f64::INFINITY };
    let degenerate = !times.is_empty() && {
        let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo <= 1e-12 * hi.abs().max(1.0)
    };
    Ok(CoalescenceSummary {
        n_trees: trees.len(),
        n_censored: censored.len(),
        pair_times: times,
        rate_mle: rate,
        rate_ci: (rate - half, rate + half),
        multifurcation_fraction: if internal > 0 { multi as f64 / internal as f64 } else { 0.0 },
        degenerate,
    })
}
