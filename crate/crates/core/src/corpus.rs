//! Adoption-event ingestion, vocabulary pruning, interaction records and
//! nested holdout splits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

pub const CORPUS_FORMAT: &str = "ldtm-corpus";
pub const CORPUS_VERSION: u32 = 1;

pub const DEFAULT_MIN_FREQUENCY: u64 = 10;

/// One line of the adoption-event file: `user` adopted `item` `count` times
/// at `time_step`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdoptionEvent {
    pub user_id: String,
    pub time_step: i64,
    pub item: String,
    pub count: u32,
}

impl AdoptionEvent {
    pub fn new(user_id: impl Into<String>, time_step: i64, item: impl Into<String>, count: u32) -> Self {
        AdoptionEvent {
            user_id: user_id.into(),
            time_step,
            item: item.into(),
            count,
        }
    }

    fn validate(&self, line: usize) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::MalformedEvent {
                line,
                reason: reason.to_string(),
            })
        };
        if self.time_step < 1 {
            return bad("time_step must be >= 1");
        }
        if u32::try_from(self.time_step).is_err() {
            return bad("time_step out of range");
        }
        if self.count < 1 {
            return bad("count must be >= 1");
        }
        if self.item.is_empty() {
            return bad("item must be nonempty");
        }
        if self.user_id.is_empty() {
            return bad("user must be nonempty");
        }
        Ok(())
    }
}

/// Parses the tab-separated event format `user TAB time_step TAB item [TAB count]`.
///
/// Blank lines and lines starting with `#` are skipped. Line numbers in
/// errors are 1-based.
pub fn read_events<R: Read>(reader: R) -> Result<Vec<AdoptionEvent>> {
    let mut events = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::MalformedEvent {
                line: lineno,
                reason: format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let time_step: i64 = fields[1].trim().parse().map_err(|_| Error::MalformedEvent {
            line: lineno,
            reason: format!("time_step `{}` is not an integer", fields[1]),
        })?;
        let count: u32 = match fields.get(3) {
            Some(c) => c.trim().parse().map_err(|_| Error::MalformedEvent {
                line: lineno,
                reason: format!("count `{c}` is not a nonnegative integer"),
            })?,
            None => 1,
        };
        let event = AdoptionEvent::new(fields[0].trim(), time_step, fields[2].trim(), count);
        event.validate(lineno)?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_events<W: Write>(mut writer: W, events: &[AdoptionEvent]) -> Result<()> {
    for e in events {
        writeln!(writer, "{}\t{}\t{}\t{}", e.user_id, e.time_step, e.item, e.count)?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PruneRules {
    pub stopwords: HashSet<String>,
    pub min_frequency: u64,
}

impl Default for PruneRules {
    fn default() -> Self {
        PruneRules {
            stopwords: HashSet::new(),
            min_frequency: DEFAULT_MIN_FREQUENCY,
        }
    }
}

impl PruneRules {
    pub fn new<I, S>(stopwords: I, min_frequency: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PruneRules {
            stopwords: stopwords.into_iter().map(Into::into).collect(),
            min_frequency,
        }
    }

    /// One stopword per line; blank lines and `#` comments ignored.
    pub fn read_stopwords(path: &Path) -> Result<HashSet<String>> {
        let text = fs::read_to_string(path)?;
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect())
    }
}

/// Bijection between retained item tokens and dense indices `0..M`.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    items: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_items(items: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.clone(), i as u32).is_some() {
                return Err(Error::Snapshot(format!("duplicate vocabulary item `{item}`")));
            }
        }
        Ok(Vocabulary { items, index })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn encode(&self, item: &str) -> Option<u32> {
        self.index.get(item).copied()
    }

    pub fn decode(&self, index: u32) -> Option<&str> {
        self.items.get(index as usize).map(String::as_str)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    /// SHA-256 over the ordered item list, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for item in &self.items {
            hasher.update(item.as_bytes());
            hasher.update([0u8]);
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

/// Token sequences of one user, `steps[t - 1]` holding time step `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserTokens {
    pub id: String,
    pub steps: Vec<Vec<u32>>,
}

impl UserTokens {
    pub fn time_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn token_count(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    users: Vec<UserTokens>,
    vocabulary: Vocabulary,
}

impl Corpus {
    /// Assembles a corpus from already-encoded token sequences. Item indices
    /// are checked against the vocabulary; users are kept as given (including
    /// users without tokens, which training splits can produce).
    pub fn from_parts(users: Vec<UserTokens>, vocabulary: Vocabulary) -> Result<Self> {
        let m = vocabulary.len() as u32;
        let mut seen = HashSet::new();
        for u in &users {
            if !seen.insert(u.id.as_str()) {
                return Err(Error::Snapshot(format!("duplicate user `{}`", u.id)));
            }
            if let Some(&bad) = u.steps.iter().flatten().find(|&&w| w >= m) {
                return Err(Error::Snapshot(format!(
                    "item index {bad} out of range for vocabulary of size {m}"
                )));
            }
        }
        Ok(Corpus { users, vocabulary })
    }

    pub fn users(&self) -> &[UserTokens] {
        &self.users
    }

    pub fn user(&self, n: usize) -> &UserTokens {
        &self.users[n]
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    /// `T_n`, the last time step of user `n`.
    pub fn time_steps(&self, n: usize) -> usize {
        self.users[n].steps.len()
    }

    /// Largest time step over all users.
    pub fn max_time(&self) -> usize {
        self.users.iter().map(UserTokens::time_steps).max().unwrap_or(0)
    }

    /// Tokens of user `n` at 1-based time step `t`. Empty outside `1..=T_n`.
    pub fn tokens(&self, n: usize, t: usize) -> &[u32] {
        if t == 0 {
            return &[];
        }
        self.users[n].steps.get(t - 1).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_tokens(&self) -> usize {
        self.users.iter().map(UserTokens::token_count).sum()
    }

    pub fn user_index(&self) -> HashMap<&str, usize> {
        self.users.iter().enumerate().map(|(n, u)| (u.id.as_str(), n)).collect()
    }

    /// Splits off the hidden positions of `split`. The training corpus keeps
    /// every user and every `T_n` so indices stay aligned with the original.
    pub fn apply_holdout(&self, split: &HoldoutSplit) -> (Corpus, Vec<HeldOutToken>) {
        let mut held = Vec::with_capacity(split.hidden.len());
        let users = self
            .users
            .iter()
            .enumerate()
            .map(|(n, u)| {
                let steps = u
                    .steps
                    .iter()
                    .enumerate()
                    .map(|(ti, toks)| {
                        let t = ti + 1;
                        let mut kept = Vec::with_capacity(toks.len());
                        for (pos, &w) in toks.iter().enumerate() {
                            if split.hidden.contains(&TokenPos { user: n, time: t, pos }) {
                                held.push(HeldOutToken {
                                    user: n,
                                    time: t,
                                    item: w,
                                });
                            } else {
                                kept.push(w);
                            }
                        }
                        kept
                    })
                    .collect();
                UserTokens {
                    id: u.id.clone(),
                    steps,
                }
            })
            .collect();
        (
            Corpus {
                users,
                vocabulary: self.vocabulary.clone(),
            },
            held,
        )
    }

    pub fn write_snapshot<W: Write>(&self, writer: W) -> Result<()> {
        let snap = CorpusSnapshot {
            format: CORPUS_FORMAT.to_string(),
            version: CORPUS_VERSION,
            vocabulary: self.vocabulary.items.clone(),
            users: self.users.clone(),
        };
        serde_json::to_writer(writer, &snap)?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(reader: R) -> Result<Self> {
        let snap: CorpusSnapshot = serde_json::from_reader(BufReader::new(reader))?;
        if snap.format != CORPUS_FORMAT {
            return Err(Error::Snapshot(format!("not a corpus snapshot: `{}`", snap.format)));
        }
        if snap.version != CORPUS_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported corpus snapshot version {}",
                snap.version
            )));
        }
        Corpus::from_parts(snap.users, Vocabulary::from_items(snap.vocabulary)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusSnapshot {
    format: String,
    version: u32,
    vocabulary: Vec<String>,
    users: Vec<UserTokens>,
}

/// Builds a corpus from raw events.
///
/// Items that are stopwords or whose corpus-wide count (summed over all
/// users and time steps) falls below `rules.min_frequency` are removed.
/// Vocabulary indices and user order follow first appearance in the stream.
/// Users left without tokens are dropped.
pub fn ingest_events(events: &[AdoptionEvent], rules: &PruneRules) -> Result<Corpus> {
    for (i, e) in events.iter().enumerate() {
        e.validate(i + 1)?;
    }

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for e in events {
        if !rules.stopwords.contains(&e.item) {
            *freq.entry(e.item.as_str()).or_default() += u64::from(e.count);
        }
    }

    let mut items = Vec::new();
    let mut item_index: HashMap<&str, u32> = HashMap::new();
    let mut user_order: Vec<&str> = Vec::new();
    let mut per_user: HashMap<&str, BTreeMap<usize, Vec<u32>>> = HashMap::new();
    for e in events {
        let keep = freq.get(e.item.as_str()).is_some_and(|&f| f >= rules.min_frequency);
        if !keep {
            continue;
        }
        let idx = *item_index.entry(e.item.as_str()).or_insert_with(|| {
            items.push(e.item.clone());
            (items.len() - 1) as u32
        });
        let slots = per_user.entry(e.user_id.as_str()).or_insert_with(|| {
            user_order.push(e.user_id.as_str());
            BTreeMap::new()
        });
        let toks = slots.entry(e.time_step as usize).or_default();
        toks.extend(std::iter::repeat_n(idx, e.count as usize));
    }

    if items.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let users = user_order
        .into_iter()
        .map(|id| {
            let slots = per_user.remove(id).unwrap_or_default();
            let t_max = slots.keys().next_back().copied().unwrap_or(0);
            let mut steps = vec![Vec::new(); t_max];
            for (t, toks) in slots {
                steps[t - 1] = toks;
            }
            UserTokens {
                id: id.to_string(),
                steps,
            }
        })
        .collect();

    Corpus::from_parts(users, Vocabulary::from_items(items)?)
}

/// A co-occurrence of users on one artifact at time `tau`, users in the
/// order they appear on the artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub users: Vec<String>,
    pub tau: usize,
    pub is_alphabetical: bool,
}

impl InteractionRecord {
    pub fn new(users: Vec<String>, tau: usize) -> Self {
        let is_alphabetical = is_alphabetical(&users);
        InteractionRecord {
            users,
            tau,
            is_alphabetical,
        }
    }
}

/// Last name of a user id: its final whitespace-separated token, lowercased.
pub fn last_name(user_id: &str) -> String {
    user_id.split_whitespace().next_back().unwrap_or("").to_lowercase()
}

/// True when sorting the users by last name leaves their order unchanged.
pub fn is_alphabetical(users: &[String]) -> bool {
    let names: Vec<String> = users.iter().map(|u| last_name(u)).collect();
    names.windows(2).all(|w| w[0] <= w[1])
}

/// Parses `tau TAB user1 TAB user2 ...`. Records need at least two users
/// and, when `max_time` is given, `1 <= tau <= max_time`.
pub fn read_interactions<R: Read>(reader: R, max_time: Option<usize>) -> Result<Vec<InteractionRecord>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let tau_field = fields.next().unwrap_or("");
        let tau: usize = tau_field.trim().parse().map_err(|_| Error::MalformedInteraction {
            line: lineno,
            reason: format!("tau `{tau_field}` is not a positive integer"),
        })?;
        let users: Vec<String> = fields.map(|f| f.trim().to_string()).filter(|f| !f.is_empty()).collect();
        if users.len() < 2 {
            return Err(Error::MalformedInteraction {
                line: lineno,
                reason: "an interaction needs at least two users".into(),
            });
        }
        if tau < 1 || max_time.is_some_and(|m| tau > m) {
            return Err(Error::MalformedInteraction {
                line: lineno,
                reason: format!("tau {tau} outside the corpus time range"),
            });
        }
        out.push(InteractionRecord::new(users, tau));
    }
    Ok(out)
}

pub fn write_interactions<W: Write>(mut writer: W, records: &[InteractionRecord]) -> Result<()> {
    for r in records {
        write!(writer, "{}", r.tau)?;
        for u in &r.users {
            write!(writer, "\t{u}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Drops records whose author order is alphabetical by last name.
pub fn filter_interactions(records: &[InteractionRecord]) -> Vec<InteractionRecord> {
    records.iter().filter(|r| !r.is_alphabetical).cloned().collect()
}

/// Author-order hypotheses about who influences whom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Second author influences the first author.
    AB,
    /// Last author influences the first author (records with > 2 authors).
    AZ,
    /// Every later-listed author influences every earlier-listed one
    /// (records with > 2 authors).
    BfAf,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::AB => "AB",
            Hypothesis::AZ => "AZ",
            Hypothesis::BfAf => "Bf_Af",
        })
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ab" => Ok(Hypothesis::AB),
            "az" => Ok(Hypothesis::AZ),
            "bf_af" | "bfaf" | "bf-af" => Ok(Hypothesis::BfAf),
            _ => Err(Error::InvalidConfig(format!("unknown hypothesis `{s}`"))),
        }
    }
}

/// `influencer` is the hypothesized source `i`, `influencee` the target `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairTask {
    pub influencer: String,
    pub influencee: String,
    pub tau: usize,
}

impl PairTask {
    fn new(i: &str, j: &str, tau: usize) -> Self {
        PairTask {
            influencer: i.to_string(),
            influencee: j.to_string(),
            tau,
        }
    }
}

pub fn pair_tasks(records: &[InteractionRecord], hypothesis: Hypothesis) -> Vec<PairTask> {
    let mut out = Vec::new();
    for r in records {
        let u = &r.users;
        match hypothesis {
            Hypothesis::AB if u.len() >= 2 => out.push(PairTask::new(&u[1], &u[0], r.tau)),
            Hypothesis::AZ if u.len() > 2 => out.push(PairTask::new(&u[u.len() - 1], &u[0], r.tau)),
            Hypothesis::BfAf if u.len() > 2 => {
                for later in 1..u.len() {
                    for earlier in 0..later {
                        out.push(PairTask::new(&u[later], &u[earlier], r.tau));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Removes tasks naming users the corpus does not know, logging each drop.
pub fn retain_known_users(tasks: Vec<PairTask>, corpus: &Corpus) -> Vec<PairTask> {
    let index = corpus.user_index();
    tasks
        .into_iter()
        .filter(|task| {
            for id in [&task.influencer, &task.influencee] {
                if !index.contains_key(id.as_str()) {
                    log::warn!(
                        "dropping pair ({} -> {}, tau {}): user `{id}` not in corpus",
                        task.influencer,
                        task.influencee,
                        task.tau
                    );
                    return false;
                }
            }
            true
        })
        .collect()
}

/// Number of distinct time steps at which each unordered user pair
/// interacted.
pub fn sustained_steps(records: &[InteractionRecord]) -> HashMap<(String, String), usize> {
    let mut steps: HashMap<(String, String), BTreeSet<usize>> = HashMap::new();
    for r in records {
        for a in 0..r.users.len() {
            for b in (a + 1)..r.users.len() {
                steps
                    .entry(unordered(&r.users[a], &r.users[b]))
                    .or_default()
                    .insert(r.tau);
            }
        }
    }
    steps.into_iter().map(|(k, v)| (k, v.len())).collect()
}

pub fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Position of one token: user index, 1-based time step, offset in the step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenPos {
    pub user: usize,
    pub time: usize,
    pub pos: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldOutToken {
    pub user: usize,
    pub time: usize,
    pub item: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HoldoutSplit {
    pub level: u32,
    pub hidden: BTreeSet<TokenPos>,
}

/// Hides `level` percent of all token positions for each requested level.
///
/// Positions are shuffled once with `seed` and every level takes a prefix
/// of the same permutation, so higher levels contain lower ones.
pub fn make_holdout(corpus: &Corpus, levels: &[u32], seed: u64) -> Result<Vec<HoldoutSplit>> {
    if let Some(&bad) = levels.iter().find(|&&l| l > 90) {
        return Err(Error::InvalidSplit(format!("level {bad}% exceeds 90%")));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSplit("levels must be strictly ascending".into()));
    }

    let mut positions: Vec<TokenPos> = Vec::with_capacity(corpus.total_tokens());
    for (n, u) in corpus.users().iter().enumerate() {
        for (ti, toks) in u.steps.iter().enumerate() {
            positions.extend((0..toks.len()).map(|pos| TokenPos {
                user: n,
                time: ti + 1,
                pos,
            }));
        }
    }
    let mut rng = rng::rng_for(seed, rng::stream::HOLDOUT);
    positions.shuffle(&mut rng);

    let total = positions.len() as u64;
    Ok(levels
        .iter()
        .map(|&level| {
            let take = ((total * u64::from(level) + 50) / 100) as usize;
            HoldoutSplit {
                level,
                hidden: positions[..take].iter().copied().collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(u: &str, t: i64, item: &str, c: u32) -> AdoptionEvent {
        AdoptionEvent::new(u, t, item, c)
    }

    fn rec(users: &[&str], tau: usize) -> InteractionRecord {
        InteractionRecord::new(users.iter().map(|s| s.to_string()).collect(), tau)
    }

    #[test]
    fn stopwords_are_removed() {
        let events = vec![ev("u1", 1, "the", 12), ev("u1", 1, "security", 12)];
        let rules = PruneRules::new(["the"], 10);
        let corpus = ingest_events(&events, &rules).unwrap();
        assert_eq!(corpus.vocab_size(), 1);
        let sec = corpus.vocabulary().encode("security").unwrap();
        assert_eq!(corpus.tokens(0, 1), vec![sec; 12].as_slice());
    }

    #[test]
    fn infrequent_items_are_pruned() {
        let events = vec![
            ev("u1", 1, "rare", 5),
            ev("u2", 2, "rare", 4),
            ev("u1", 1, "common", 10),
        ];
        let corpus = ingest_events(&events, &PruneRules::default()).unwrap();
        assert!(corpus.vocabulary().encode("rare").is_none());
        assert!(corpus.vocabulary().encode("common").is_some());
        // u2 only had the pruned item
        assert_eq!(corpus.num_users(), 1);
    }

    #[test]
    fn time_step_zero_is_malformed() {
        let err = ingest_events(&[ev("u1", 0, "x", 20)], &PruneRules::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedEvent { .. }));
        let text = "u1\t0\tx\t3\n";
        assert!(matches!(
            read_events(text.as_bytes()),
            Err(Error::MalformedEvent { line: 1, .. })
        ));
    }

    #[test]
    fn empty_after_pruning() {
        let err = ingest_events(&[ev("u1", 1, "x", 2)], &PruneRules::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    #[test]
    fn token_order_and_gaps() {
        let events = vec![ev("a", 3, "y", 10), ev("a", 1, "x", 10), ev("a", 3, "x", 1)];
        let corpus = ingest_events(&events, &PruneRules::default()).unwrap();
        let (x, y) = (
            corpus.vocabulary().encode("x").unwrap(),
            corpus.vocabulary().encode("y").unwrap(),
        );
        assert_eq!(corpus.time_steps(0), 3);
        assert!(corpus.tokens(0, 2).is_empty());
        let mut expect = vec![y; 10];
        expect.push(x);
        assert_eq!(corpus.tokens(0, 3), expect.as_slice());
    }

    #[test]
    fn parses_event_lines() {
        let text = "# header\nalice smith\t2\tgraph\t3\nbob\t1\ttree\n\n";
        let events = read_events(text.as_bytes()).unwrap();
        assert_eq!(events, vec![ev("alice smith", 2, "graph", 3), ev("bob", 1, "tree", 1)]);
    }

    #[test]
    fn holdout_exact_proportion_and_nesting() {
        let events = vec![ev("a", 1, "x", 60), ev("b", 2, "x", 40)];
        let corpus = ingest_events(&events, &PruneRules::default()).unwrap();
        let splits = make_holdout(&corpus, &[10], 3).unwrap();
        assert_eq!(splits[0].hidden.len(), 10);

        let splits = make_holdout(&corpus, &[10, 20], 7).unwrap();
        assert!(splits[0].hidden.is_subset(&splits[1].hidden));
        assert!(splits[0].hidden.len() < splits[1].hidden.len());
        assert_eq!(splits, make_holdout(&corpus, &[10, 20], 7).unwrap());
    }

    #[test]
    fn holdout_level_limits() {
        let corpus = ingest_events(&[ev("a", 1, "x", 10)], &PruneRules::default()).unwrap();
        assert!(matches!(make_holdout(&corpus, &[95], 1), Err(Error::InvalidSplit(_))));
        assert!(matches!(
            make_holdout(&corpus, &[20, 10], 1),
            Err(Error::InvalidSplit(_))
        ));
    }

    #[test]
    fn apply_holdout_partitions_tokens() {
        let events = vec![ev("a", 1, "x", 30), ev("a", 2, "y", 30)];
        let corpus = ingest_events(&events, &PruneRules::default()).unwrap();
        let split = &make_holdout(&corpus, &[30], 11).unwrap()[0];
        let (train, held) = corpus.apply_holdout(split);
        assert_eq!(held.len(), 18);
        assert_eq!(train.total_tokens() + held.len(), corpus.total_tokens());
        assert_eq!(train.time_steps(0), 2);
    }

    #[test]
    fn alphabetical_filter() {
        let recs = vec![
            rec(&["Ann Adams", "Bo Baker", "Cy Chua"], 3),
            rec(&["Cy Chua", "Ann Adams"], 3),
        ];
        let kept = filter_interactions(&recs);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].users[0], "Cy Chua");
        assert!(kept.iter().all(|r| !is_alphabetical(&r.users)));
    }

    #[test]
    fn last_name_is_case_insensitive() {
        assert!(is_alphabetical(&["x ADAMS".into(), "y baker".into()]));
        assert!(!is_alphabetical(&["x baker".into(), "y Adams".into()]));
    }

    #[test]
    fn hypotheses_enumerate_pairs() {
        let two = rec(&["A", "B"], 5);
        let three = rec(&["A", "B", "C"], 6);
        assert_eq!(
            pair_tasks(std::slice::from_ref(&two), Hypothesis::AB),
            vec![PairTask::new("B", "A", 5)]
        );
        assert!(pair_tasks(std::slice::from_ref(&two), Hypothesis::BfAf).is_empty());
        assert!(pair_tasks(std::slice::from_ref(&two), Hypothesis::AZ).is_empty());
        assert_eq!(
            pair_tasks(std::slice::from_ref(&three), Hypothesis::AZ),
            vec![PairTask::new("C", "A", 6)]
        );
        assert_eq!(
            pair_tasks(&[three], Hypothesis::BfAf),
            vec![
                PairTask::new("B", "A", 6),
                PairTask::new("C", "A", 6),
                PairTask::new("C", "B", 6)
            ]
        );
    }

    #[test]
    fn interaction_file_round_trip() {
        let text = "5\tCy Chua\tAnn Adams\n2\ta\tb\tc\n";
        let recs = read_interactions(text.as_bytes(), Some(10)).unwrap();
        assert_eq!(recs[0].users, vec!["Cy Chua", "Ann Adams"]);
        assert!(!recs[0].is_alphabetical);
        assert!(recs[1].is_alphabetical);
        assert!(read_interactions("11\ta\tb\n".as_bytes(), Some(10)).is_err());
        assert!(read_interactions("1\ta\n".as_bytes(), None).is_err());
    }

    #[test]
    fn sustained_counts_distinct_steps() {
        let recs = vec![rec(&["A", "B"], 1), rec(&["B", "A"], 1), rec(&["A", "B", "C"], 4)];
        let s = sustained_steps(&recs);
        assert_eq!(s[&unordered("A", "B")], 2);
        assert_eq!(s[&unordered("C", "A")], 1);
    }

    #[test]
    fn snapshot_round_trip() {
        let events = vec![ev("a", 1, "x", 10), ev("b", 3, "y", 12)];
        let corpus = ingest_events(&events, &PruneRules::default()).unwrap();
        let mut buf = Vec::new();
        corpus.write_snapshot(&mut buf).unwrap();
        assert_eq!(Corpus::read_snapshot(buf.as_slice()).unwrap(), corpus);
        let bad = br#"{"format":"other","version":1,"vocabulary":[],"users":[]}"#;
        assert!(Corpus::read_snapshot(&bad[..]).is_err());
    }
}
