//! Top-N recommendation over Affective Index similarity.
//!
//! * content: cosine similarity between the user's profile and each item.
//! * collaborative: items consumed by the `k_users` most similar peers,
//!   scored by the sum of those peers' similarities, scaled so the best
//!   candidate scores 1.
//! * hybrid: `alpha * content + (1 - alpha) * collaborative`.
//!
//! Items the user already consumed are never returned. Output is sorted by
//! score descending, then item id ascending.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::cosine_similarity;
use crate::aii::rank_order;
use crate::profiles::{CatalogItem, UserProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Content,
    Collaborative,
    Hybrid,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "content" => Ok(Strategy::Content),
            "collaborative" => Ok(Strategy::Collaborative),
            "hybrid" => Ok(Strategy::Hybrid),
            other => Err(format!(
                "unknown strategy {other:?} (expected content, collaborative or hybrid)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub item_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub strategy: Strategy,
    pub items: Vec<Recommendation>,
}

impl RecommendationList {
    pub fn item_ids(&self) -> Vec<&str> {
        self.items.iter().map(|r| r.item_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("alpha must be within [0, 1], got {0}")]
    Alpha(f64),
    #[error("k_users must be at least 1")]
    KUsers,
    #[error("n must be at least 1")]
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodConfig {
    pub k_users: usize,
    /// Weight of the content score in the hybrid blend.
    pub alpha: f64,
    pub n: usize,
}

impl NeighborhoodConfig {
    pub fn new(n: usize) -> Self {
        Self {
            k_users: 10,
            alpha: 0.5,
            n,
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if self.k_users == 0 {
            return Err(ConfigError::KUsers);
        }
        if self.n == 0 {
            return Err(ConfigError::N);
        }
        Ok(())
    }
}

fn ranked(strategy: Strategy, mut scored: Vec<(String, f64)>, n: usize) -> RecommendationList {
    scored.sort_by(|a, b| rank_order(a.1, &a.0, b.1, &b.0));
    scored.truncate(n);
    RecommendationList {
        strategy,
        items: scored
            .into_iter()
            .map(|(item_id, score)| Recommendation { item_id, score })
            .collect(),
    }
}

/// Cosine score of every catalog item the user has not consumed.
fn content_scores(profile: &UserProfile, catalog: &[CatalogItem]) -> Vec<(String, f64)> {
    catalog
        .iter()
        .filter(|item| !profile.has_consumed(&item.item_id))
        .map(|item| (item.item_id.clone(), cosine_similarity(&profile.index, &item.index)))
        .collect()
}

/// The `k` peers most similar to the user, most similar first.
fn nearest_peers<'a>(profile: &UserProfile, peers: &'a [UserProfile], k: usize) -> Vec<(&'a UserProfile, f64)> {
    let mut scored: Vec<_> = peers
        .iter()
        .filter(|p| p.emotion_id != profile.emotion_id)
        .map(|p| (p, cosine_similarity(&profile.index, &p.index)))
        .collect();
    scored.sort_by(|a, b| rank_order(a.1, a.0.emotion_id.as_str(), b.1, b.0.emotion_id.as_str()));
    scored.truncate(k);
    scored
}

/// Max-normalized similarity sums for every collaborative candidate.
fn collaborative_scores(
    profile: &UserProfile,
    peers: &[UserProfile],
    catalog: &[CatalogItem],
    k_users: usize,
) -> BTreeMap<String, f64> {
    let in_catalog: HashSet<&str> = catalog.iter().map(|c| c.item_id.as_str()).collect();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for (peer, similarity) in nearest_peers(profile, peers, k_users) {
        for item_id in &peer.consumed_ids {
            if in_catalog.contains(item_id.as_str()) && !profile.has_consumed(item_id) {
                *sums.entry(item_id.clone()).or_insert(0.0) += similarity;
            }
        }
    }
    let max = sums.values().copied().fold(0.0, f64::max);
    for score in sums.values_mut() {
        *score = if max > 0.0 { *score / max } else { 0.0 };
    }
    sums
}

pub fn recommend_content(profile: &UserProfile, catalog: &[CatalogItem], n: usize) -> RecommendationList {
    ranked(Strategy::Content, content_scores(profile, catalog), n)
}

pub fn recommend_collaborative(
    profile: &UserProfile,
    peers: &[UserProfile],
    catalog: &[CatalogItem],
    config: &NeighborhoodConfig,
) -> RecommendationList {
    let scores = collaborative_scores(profile, peers, catalog, config.k_users);
    ranked(Strategy::Collaborative, scores.into_iter().collect(), config.n)
}

/// Blends both strategies. A strategy with zero weight contributes no
/// candidates, so `alpha` of exactly 1 or 0 reproduces the pure strategy.
pub fn recommend_hybrid(
    profile: &UserProfile,
    peers: &[UserProfile],
    catalog: &[CatalogItem],
    config: &NeighborhoodConfig,
) -> RecommendationList {
    let alpha = config.alpha;
    let mut content: BTreeMap<String, f64> = BTreeMap::new();
    if alpha > 0.0 {
        content.extend(content_scores(profile, catalog));
    }
    let collaborative = if alpha < 1.0 {
        collaborative_scores(profile, peers, catalog, config.k_users)
    } else {
        BTreeMap::new()
    };
    let mut ids: Vec<&String> = content.keys().chain(collaborative.keys()).collect();
    ids.sort();
    ids.dedup();
    let blended = ids
        .into_iter()
        .map(|id| {
            let c = content.get(id).copied().unwrap_or(0.0);
            let k = collaborative.get(id).copied().unwrap_or(0.0);
            (id.clone(), (alpha * c + (1.0 - alpha) * k).min(1.0))
        })
        .collect();
    ranked(Strategy::Hybrid, blended, config.n)
}

pub fn recommend(
    strategy: Strategy,
    profile: &UserProfile,
    peers: &[UserProfile],
    catalog: &[CatalogItem],
    config: &NeighborhoodConfig,
) -> RecommendationList {
    match strategy {
        Strategy::Content => recommend_content(profile, catalog, config.n),
        Strategy::Collaborative => recommend_collaborative(profile, peers, catalog, config),
        Strategy::Hybrid => recommend_hybrid(profile, peers, catalog, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::{AffectiveIndex, Emotion};
    use crate::privacy::EmotionId;
    use crate::profiles::profile_from_history;

    fn one_hot(id: &str, e: Emotion) -> CatalogItem {
        CatalogItem::new(id, AffectiveIndex::one_hot(e))
    }

    fn user(id: &str, history: &[&CatalogItem]) -> UserProfile {
        profile_from_history(EmotionId::new(id).unwrap(), history.iter().copied()).unwrap()
    }

    fn orthogonal_catalog() -> Vec<CatalogItem> {
        vec![
            one_hot("A", Emotion::Sadness),
            one_hot("B", Emotion::Anger),
            one_hot("C", Emotion::Fear),
        ]
    }

    #[test]
    fn content_picks_aligned_item() {
        let s = one_hot("seen", Emotion::Sadness);
        let p = user("u", &[&s]);
        let list = recommend_content(&p, &orthogonal_catalog(), 1);
        assert_eq!(list.items, vec![Recommendation { item_id: "A".into(), score: 1.0 }]);
        assert_eq!(list.strategy, Strategy::Content);
    }

    #[test]
    fn content_excludes_consumed_and_handles_short_catalog() {
        let cat = orthogonal_catalog();
        let p = user("u", &[&cat[0], &cat[1], &cat[2]]);
        assert!(recommend_content(&p, &cat, 5).items.is_empty());

        let p = user("u", &[&cat[0]]);
        let list = recommend_content(&p, &cat, 10);
        assert_eq!(list.item_ids(), ["B", "C"]);
    }

    #[test]
    fn collaborative_single_peer() {
        let x = one_hot("X", Emotion::Fear);
        let me = UserProfile::cold_start(EmotionId::new("me").unwrap());
        let mut peer = user("peer", &[&x]);
        peer.index = me.index;
        let list = recommend_collaborative(&me, &[peer], &[x], &NeighborhoodConfig::new(5));
        assert_eq!(list.items, vec![Recommendation { item_id: "X".into(), score: 1.0 }]);
    }

    #[test]
    fn collaborative_nothing_new() {
        let x = one_hot("X", Emotion::Fear);
        let me = user("me", &[&x]);
        let peer = user("peer", &[&x]);
        let list = recommend_collaborative(&me, &[peer], &[x], &NeighborhoodConfig::new(5));
        assert!(list.items.is_empty());
        let list = recommend_collaborative(&me, &[], &orthogonal_catalog(), &NeighborhoodConfig::new(5));
        assert!(list.items.is_empty());
    }

    #[test]
    fn collaborative_sums_and_normalizes() {
        let cat = orthogonal_catalog();
        let seen = one_hot("S", Emotion::Sadness);
        let me = user("me", &[&seen]);
        // p1 identical taste (sim 1) consumed A and B; p2 sim 0 consumed B, C.
        let p1 = user("p1", &[&cat[0], &seen]);
        let mut p1b = p1.clone();
        p1b.consumed_ids.insert("B".into());
        p1b.consumed_count += 1;
        let p2 = user("p2", &[&cat[1], &cat[2]]);
        let cfg = NeighborhoodConfig { k_users: 2, ..NeighborhoodConfig::new(10) };
        let list = recommend_collaborative(&me, &[p2.clone(), p1b.clone()], &cat, &cfg);
        assert_eq!(list.item_ids(), ["A", "B", "C"]);
        assert_eq!(list.items[0].score, 1.0);
        assert_eq!(list.items[1].score, 1.0);
        assert_eq!(list.items[2].score, 0.0);

        let cfg = NeighborhoodConfig { k_users: 1, ..cfg };
        let list = recommend_collaborative(&me, &[p2, p1b], &cat, &cfg);
        assert_eq!(list.item_ids(), ["A", "B"]);
    }

    #[test]
    fn collaborative_ignores_items_outside_catalog() {
        let x = one_hot("X", Emotion::Fear);
        let gone = one_hot("gone", Emotion::Fear);
        let me = user("me", &[]);
        let peer = user("peer", &[&x, &gone]);
        let list = recommend_collaborative(&me, &[peer], &[x], &NeighborhoodConfig::new(5));
        assert_eq!(list.item_ids(), ["X"]);
    }

    #[test]
    fn hybrid_degenerates_to_pure_strategies() {
        let cat: Vec<_> = (0..10)
            .map(|i| {
                let e = Emotion::ALL[i % 6];
                one_hot(&format!("i{i}"), e)
            })
            .collect();
        let me = user("me", &[&cat[0], &cat[1]]);
        let peers = vec![user("a", &[&cat[2], &cat[3]]), user("b", &[&cat[1], &cat[7]])];
        for n in [1, 3, 20] {
            let cfg = NeighborhoodConfig { k_users: 2, alpha: 1.0, n };
            let h = recommend_hybrid(&me, &peers, &cat, &cfg);
            assert_eq!(h.items, recommend_content(&me, &cat, n).items);
            let cfg = NeighborhoodConfig { alpha: 0.0, ..cfg };
            let h = recommend_hybrid(&me, &peers, &cat, &cfg);
            assert_eq!(h.items, recommend_collaborative(&me, &peers, &cat, &cfg).items);
        }
    }

    #[test]
    fn config_checks() {
        assert!(NeighborhoodConfig::new(1).check().is_ok());
        assert_eq!(
            NeighborhoodConfig { alpha: 1.5, ..NeighborhoodConfig::new(1) }.check(),
            Err(ConfigError::Alpha(1.5))
        );
        assert_eq!(
            NeighborhoodConfig { k_users: 0, ..NeighborhoodConfig::new(1) }.check(),
            Err(ConfigError::KUsers)
        );
        assert_eq!(NeighborhoodConfig::new(0).check(), Err(ConfigError::N));
    }

    #[test]
    fn list_json_shape() {
        let list = RecommendationList {
            strategy: Strategy::Hybrid,
            items: vec![Recommendation { item_id: "a".into(), score: 0.5 }],
        };
        assert_eq!(
            serde_json::to_string(&list).unwrap(),
            r#"{"strategy":"hybrid","items":[{"item_id":"a","score":0.5}]}"#
        );
    }
}
