use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Semantic classes a label map can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Other,
    Road,
    Sidewalk,
    Building,
    Sky,
    Pedestrian,
    TrafficLight,
    TrafficSign,
    Vehicle,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Other,
        Category::Road,
        Category::Sidewalk,
        Category::Building,
        Category::Sky,
        Category::Pedestrian,
        Category::TrafficLight,
        Category::TrafficSign,
        Category::Vehicle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Other => "other",
            Category::Road => "road",
            Category::Sidewalk => "sidewalk",
            Category::Building => "building",
            Category::Sky => "sky",
            Category::Pedestrian => "pedestrian",
            Category::TrafficLight => "traffic_light",
            Category::TrafficSign => "traffic_sign",
            Category::Vehicle => "vehicle",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

/// Maps label-map pixel ids to categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryRegistry {
    by_id: [Option<Category>; 256],
    ids: [u8; 9],
}

impl Default for CategoryRegistry {
    /// other:0 road:1 sidewalk:2 building:3 sky:4 pedestrian:5
    /// traffic_light:6 traffic_sign:7 vehicle:8
    fn default() -> Self {
        let pairs: Vec<(Category, u8)> = Category::ALL
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i as u8))
            .collect();
        CategoryRegistry::from_pairs(&pairs).expect("default ids are unique")
    }
}

impl CategoryRegistry {
    /// Build from explicit `(category, id)` pairs covering every category once.
    pub fn from_pairs(pairs: &[(Category, u8)]) -> Result<Self> {
        let mut by_id = [None; 256];
        let mut ids = [0u8; 9];
        let mut seen = [false; 9];
        for &(cat, id) in pairs {
            if by_id[id as usize].is_some() {
                return Err(Error::Config(format!("pixel id {id} assigned twice")));
            }
            let slot = cat as usize;
            if seen[slot] {
                return Err(Error::Config(format!("category {cat} assigned twice")));
            }
            seen[slot] = true;
            by_id[id as usize] = Some(cat);
            ids[slot] = id;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!(
                "category {} has no pixel id",
                Category::ALL[i]
            )));
        }
        Ok(CategoryRegistry { by_id, ids })
    }

    pub fn category(&self, id: u8) -> Result<Category> {
        self.by_id[id as usize].ok_or(Error::UnknownPixelId(id))
    }

    #[inline]
    pub fn lookup(&self, id: u8) -> Option<Category> {
        self.by_id[id as usize]
    }

    #[inline]
    pub fn id(&self, cat: Category) -> u8 {
        self.ids[cat as usize]
    }
}
