//! Party affiliation from candidate retweets and candidate follows.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{TweetStore, UserId};

#[derive(Debug, Error)]
pub enum AffiliationError {
    #[error("party roster is empty")]
    EmptyRoster,
    #[error("party roster needs at least two parties, found {0}")]
    TooFewParties(usize),
    #[error("candidate {candidate} listed under both {first} and {second}")]
    SharedCandidate {
        candidate: String,
        first: String,
        second: String,
    },
    #[error("party {0} appears twice in the roster")]
    DuplicateParty(String),
    #[error("affiliation threshold {0} must lie in (0.5, 1]")]
    Threshold(f64),
    #[error("unknown party {0}")]
    UnknownParty(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed table {path}: {message}")]
    Table { path: String, message: String },
}

/// Dense party index into a [`PartyRoster`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartyId(pub u16);

impl PartyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Party {
    pub id: String,
    pub acronym: String,
    pub name: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyRoster {
    parties: Vec<Party>,
    candidate_party: HashMap<String, PartyId>,
}

impl PartyRoster {
    pub fn new(parties: Vec<Party>) -> Result<Self, AffiliationError> {
        if parties.is_empty() {
            return Err(AffiliationError::EmptyRoster);
        }
        if parties.len() < 2 {
            return Err(AffiliationError::TooFewParties(parties.len()));
        }
        let mut candidate_party = HashMap::new();
        for (i, party) in parties.iter().enumerate() {
            if parties[..i].iter().any(|p| p.id == party.id) {
                return Err(AffiliationError::DuplicateParty(party.id.clone()));
            }
            for candidate in &party.candidates {
                if let Some(prev) = candidate_party.insert(candidate.clone(), PartyId(i as u16)) {
                    if prev.index() != i {
                        return Err(AffiliationError::SharedCandidate {
                            candidate: candidate.clone(),
                            first: parties[prev.index()].id.clone(),
                            second: party.id.clone(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            parties,
            candidate_party,
        })
    }

    /// Long table, one candidate per row: `party_id,acronym,name,candidate_id`.
    pub fn load(path: &Path) -> Result<Self, AffiliationError> {
        let table_err = |message: String| AffiliationError::Table {
            path: path.display().to_string(),
            message,
        };
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut parties: Vec<Party> = Vec::new();
        for row in reader.deserialize::<RosterRow>() {
            let row = row.map_err(|e| table_err(e.to_string()))?;
            match parties.iter_mut().find(|p| p.id == row.party_id) {
                Some(p) => p.candidates.push(row.candidate_id),
                None => parties.push(Party {
                    id: row.party_id,
                    acronym: row.acronym,
                    name: row.name,
                    candidates: vec![row.candidate_id],
                }),
            }
        }
        Self::new(parties)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for party in &self.parties {
            for candidate in &party.candidates {
                writer.serialize(RosterRow {
                    party_id: party.id.clone(),
                    acronym: party.acronym.clone(),
                    name: party.name.clone(),
                    candidate_id: candidate.clone(),
                })?;
            }
        }
        writer.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party(&self, id: PartyId) -> &Party {
        &self.parties[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = PartyId> {
        (0..self.parties.len()).map(|i| PartyId(i as u16))
    }

    /// Look a party up by id or acronym.
    pub fn find(&self, key: &str) -> Option<PartyId> {
        self.parties
            .iter()
            .position(|p| p.id == key || p.acronym == key)
            .map(|i| PartyId(i as u16))
    }

    pub fn resolve(&self, key: &str) -> Result<PartyId, AffiliationError> {
        self.find(key).ok_or_else(|| AffiliationError::UnknownParty(key.to_owned()))
    }

    pub fn party_of_candidate(&self, account: &str) -> Option<PartyId> {
        self.candidate_party.get(account).copied()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RosterRow {
    party_id: String,
    acronym: String,
    #[serde(default)]
    name: String,
    candidate_id: String,
}

fn csv_error(path: &Path, e: csv::Error) -> AffiliationError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => AffiliationError::Io {
            path: path.display().to_string(),
            source,
        },
        other => AffiliationError::Table {
            path: path.display().to_string(),
            message: format!("{other:?}"),
        },
    }
}

/// `user_id,candidate_id` follow edges.
pub fn load_follows(path: &Path) -> Result<Vec<(String, String)>, AffiliationError> {
    #[derive(Deserialize)]
    struct Row {
        user_id: String,
        candidate_id: String,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize::<Row>()
        .map(|r| {
            r.map(|r| (r.user_id, r.candidate_id))
                .map_err(|e| AffiliationError::Table {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffiliationBasis {
    Retweets,
    Follows,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserEvidence {
    /// Candidate retweets per party before the cutoff.
    pub retweets: Vec<u32>,
    /// Whether the user follows at least one candidate of each party.
    pub follows: Vec<bool>,
    pub party: Option<PartyId>,
    pub basis: AffiliationBasis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffiliationResult {
    pub cutoff: NaiveDate,
    pub threshold: f64,
    n_parties: usize,
    /// Users with any candidate evidence; everyone else is unaffiliated.
    users: BTreeMap<UserId, UserEvidence>,
}

impl AffiliationResult {
    pub fn from_evidence(
        cutoff: NaiveDate,
        threshold: f64,
        n_parties: usize,
        users: BTreeMap<UserId, UserEvidence>,
    ) -> Self {
        Self {
            cutoff,
            threshold,
            n_parties,
            users,
        }
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn party_of(&self, user: UserId) -> Option<PartyId> {
        self.users.get(&user).and_then(|e| e.party)
    }

    pub fn evidence(&self, user: UserId) -> Option<&UserEvidence> {
        self.users.get(&user)
    }

    pub fn users(&self) -> impl Iterator<Item = (UserId, &UserEvidence)> {
        self.users.iter().map(|(u, e)| (*u, e))
    }

    /// Affiliated users in ascending id order.
    pub fn assigned(&self) -> impl Iterator<Item = (UserId, PartyId)> + '_ {
        self.users.iter().filter_map(|(u, e)| e.party.map(|p| (*u, p)))
    }

    pub fn members(&self, party: PartyId) -> Vec<UserId> {
        self.assigned().filter(|(_, p)| *p == party).map(|(u, _)| u).collect()
    }

    pub fn party_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_parties];
        for (_, p) in self.assigned() {
            sizes[p.index()] += 1;
        }
        sizes
    }

    /// Dense lookup table indexed by user id.
    pub fn party_table(&self, n_users: usize) -> Vec<Option<PartyId>> {
        let mut table = vec![None; n_users];
        for (u, p) in self.assigned() {
            if u.index() < n_users {
                table[u.index()] = Some(p);
            }
        }
        table
    }
}

/// The affiliation rule for one user.
///
/// With at least one candidate retweet, the party holding a share of at
/// least `threshold` of those retweets wins. Without retweets, following
/// candidates of exactly one party decides.
pub fn decide(retweets: &[u32], follows: &[bool], threshold: f64) -> (Option<PartyId>, AffiliationBasis) {
    let total: u64 = retweets.iter().map(|&c| u64::from(c)).sum();
    if total > 0 {
        let winners: Vec<usize> = retweets
            .iter()
            .enumerate()
            .filter(|(_, &c)| c as f64 / total as f64 >= threshold)
            .map(|(i, _)| i)
            .collect();
        debug_assert!(winners.len() <= 1, "threshold above one half admits one winner");
        return match winners.first() {
            Some(&i) => (Some(PartyId(i as u16)), AffiliationBasis::Retweets),
            None => (None, AffiliationBasis::Undecided),
        };
    }
    let mut followed = follows.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i);
    match (followed.next(), followed.next()) {
        (Some(i), None) => (Some(PartyId(i as u16)), AffiliationBasis::Follows),
        _ => (None, AffiliationBasis::Undecided),
    }
}

/// Infer affiliations from records strictly before `cutoff` (local midnight
/// in the capture timezone, given as UTC seconds by `cutoff_timestamp`).
///
/// Every candidate retweet event counts, simple or quoted. Follow edges of
/// users absent from the stream are ignored: they never reach any analysis.
pub fn infer_affiliations(
    store: &TweetStore,
    follows: &[(String, String)],
    roster: &PartyRoster,
    cutoff: NaiveDate,
    cutoff_timestamp: i64,
    threshold: f64,
) -> Result<AffiliationResult, AffiliationError> {
    if roster.is_empty() {
        return Err(AffiliationError::EmptyRoster);
    }
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(AffiliationError::Threshold(threshold));
    }
    let n = roster.len();
    let candidate_party: HashMap<UserId, PartyId> = roster
        .parties()
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.candidates.iter().map(move |c| (c, PartyId(i as u16))))
        .filter_map(|(c, p)| store.interner.user_id(c).map(|u| (u, p)))
        .collect();

    let blank = || UserEvidence {
        retweets: vec![0; n],
        follows: vec![false; n],
        party: None,
        basis: AffiliationBasis::Undecided,
    };
    let mut users: BTreeMap<UserId, UserEvidence> = BTreeMap::new();
    for record in store.records.iter().take_while(|r| r.timestamp < cutoff_timestamp) {
        if let Some(party) = record.retweeted_user.and_then(|u| candidate_party.get(&u)) {
            users.entry(record.user).or_insert_with(blank).retweets[party.index()] += 1;
        }
    }
    for (user, candidate) in follows {
        let (Some(user), Some(party)) = (store.interner.user_id(user), roster.party_of_candidate(candidate)) else {
            continue;
        };
        users.entry(user).or_insert_with(blank).follows[party.index()] = true;
    }
    for evidence in users.values_mut() {
        let (party, basis) = decide(&evidence.retweets, &evidence.follows, threshold);
        evidence.party = party;
        evidence.basis = basis;
    }
    Ok(AffiliationResult {
        cutoff,
        threshold,
        n_parties: n,
        users,
    })
}
