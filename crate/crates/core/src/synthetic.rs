//! Seeded synthetic corpora and graphs for tests, benchmarks and demos.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeKind, HeteroGraph, NodeId, NodeKind};
use crate::ingest::{CategoryRecord, Corpus, PostRecord};

/// Topic name followed by words used in that topic's posts and hashtags.
const TOPICS: [(&str, [&str; 11]); 10] = [
    (
        "beauty",
        [
            "glow", "skin", "serum", "lipstick", "makeup", "blush", "mascara", "toner", "lotion", "nails", "brow",
        ],
    ),
    (
        "shoes",
        [
            "sneaker", "boot", "heel", "sandal", "lace", "sole", "loafer", "running", "leather", "suede", "clog",
        ],
    ),
    (
        "fitness",
        [
            "gym", "squat", "cardio", "yoga", "sweat", "muscle", "stretch", "pilates", "lift", "plank", "sprint",
        ],
    ),
    (
        "cooking",
        [
            "recipe", "bake", "pasta", "spice", "grill", "soup", "bread", "sauce", "vegan", "salad", "roast",
        ],
    ),
    (
        "travel",
        [
            "beach", "hotel", "flight", "island", "hike", "passport", "resort", "city", "cruise", "trail", "camp",
        ],
    ),
    (
        "gaming",
        [
            "console", "arcade", "quest", "level", "pixel", "stream", "joystick", "raid", "loot", "boss", "speedrun",
        ],
    ),
    (
        "music",
        [
            "guitar", "drum", "melody", "vinyl", "concert", "piano", "lyric", "bass", "chorus", "violin", "remix",
        ],
    ),
    (
        "pets",
        [
            "puppy", "kitten", "leash", "treat", "paw", "groom", "collar", "aquarium", "parrot", "hamster", "kennel",
        ],
    ),
    (
        "garden",
        [
            "tulip", "compost", "seed", "soil", "orchid", "prune", "bloom", "cactus", "herb", "fern", "mulch",
        ],
    ),
    (
        "watches",
        [
            "dial", "strap", "chrono", "quartz", "bezel", "wrist", "gold", "steel", "vintage", "luxury", "crown",
        ],
    ),
];

/// Category roots grouping the topic categories.
const GROUPS: [(&str, &[usize]); 3] = [
    ("Style", &[0, 1, 9]),
    ("Lifestyle", &[2, 3, 4, 7, 8]),
    ("Entertainment", &[5, 6]),
];

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Hashtag texts of one topic, in a fixed order: `#TopicWord`, then `#WordWord` pairs.
fn topic_hashtags(topic: usize) -> Vec<String> {
    let (name, words) = TOPICS[topic];
    let mut out: Vec<String> = words
        .iter()
        .map(|w| format!("#{}{}", capitalize(name), capitalize(w)))
        .collect();
    for a in words {
        for b in words {
            if a != b {
                out.push(format!("#{}{}", capitalize(a), capitalize(b)));
            }
        }
    }
    out
}

/// Category records: three roots with topic children.
pub fn synthetic_categories() -> Vec<CategoryRecord> {
    let mut out = Vec::new();
    for (g, (root, topics)) in GROUPS.iter().enumerate() {
        out.push(CategoryRecord {
            id: format!("g{g}"),
            name: root.to_string(),
            parent: None,
        });
        for &t in *topics {
            out.push(CategoryRecord {
                id: format!("t{t}"),
                name: capitalize(TOPICS[t].0),
                parent: Some(format!("g{g}")),
            });
        }
    }
    out
}

/// A corpus with exactly `hashtags` distinct hashtags (at most 1210) spread over ten
/// topics. Post `i` carries hashtag `i` plus up to two more from the same topic, so
/// there is one post per hashtag and post counts vary.
pub fn synthetic_corpus(hashtags: usize, users: usize, seed: u64) -> Corpus {
    let per_topic: Vec<Vec<String>> = (0..TOPICS.len()).map(topic_hashtags).collect();
    let capacity: usize = per_topic.iter().map(Vec::len).sum();
    assert!(hashtags <= capacity, "at most {capacity} synthetic hashtags");
    assert!(users > 0, "need at least one user");
    // Round-robin over topics so every prefix is balanced.
    let mut tags: Vec<(usize, &str)> = Vec::with_capacity(hashtags);
    let mut k = 0;
    while tags.len() < hashtags {
        for (t, list) in per_topic.iter().enumerate() {
            if k < list.len() && tags.len() < hashtags {
                tags.push((t, &list[k]));
            }
        }
        k += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut posts = Vec::with_capacity(hashtags);
    for (i, &(topic, tag)) in tags.iter().enumerate() {
        let (name, words) = TOPICS[topic];
        // Users lean towards one topic.
        let user = if rng.random_bool(0.8) {
            (topic + TOPICS.len() * rng.random_range(0..users.div_ceil(TOPICS.len()))) % users
        } else {
            rng.random_range(0..users)
        };
        let sentence = |n: usize, rng: &mut ChaCha8Rng| {
            let mut s: Vec<&str> = (0..n).map(|_| *words.choose(rng).expect("non-empty")).collect();
            if rng.random_bool(0.3) {
                s.push(name);
            }
            s.join(" ")
        };
        let text = format!(
            "{}. {}",
            sentence(rng.random_range(3..7), &mut rng),
            sentence(rng.random_range(2..5), &mut rng)
        );
        let mut hashtags = vec![tag.to_string()];
        let same: Vec<&(usize, &str)> = tags[..=i].iter().filter(|(t, _)| *t == topic).collect();
        for _ in 0..rng.random_range(0..3) {
            let extra = same.choose(&mut rng).expect("contains the post's own hashtag").1;
            if !hashtags.iter().any(|h| h == extra) {
                hashtags.push(extra.to_string());
            }
        }
        posts.push(PostRecord {
            id: format!("p{i}"),
            user: format!("u{user}"),
            text,
            hashtags,
            timestamp: 1_600_000_000 + rng.random_range(0..86_400 * 60),
        });
    }
    Corpus::from_records(posts, synthetic_categories())
}

/// Two cliques of `size` word nodes joined by one bridge edge. Returns the graph and
/// the members of each clique.
pub fn two_cliques(size: usize) -> (HeteroGraph, Vec<NodeId>, Vec<NodeId>) {
    let mut b = HeteroGraph::builder();
    let mut make = |prefix: &str| -> Vec<NodeId> {
        let nodes: Vec<NodeId> = (0..size)
            .map(|i| b.node(NodeKind::Word, &format!("{prefix}{i}")))
            .collect();
        for (i, &x) in nodes.iter().enumerate() {
            for &y in &nodes[i + 1..] {
                b.add_edge(x, y, EdgeKind::WordWord).expect("word pair");
            }
        }
        nodes
    };
    let left = make("a");
    let right = make("b");
    if let (Some(&l), Some(&r)) = (left.last(), right.first()) {
        b.add_edge(l, r, EdgeKind::WordWord).expect("bridge");
    }
    (b.build(), left, right)
}
