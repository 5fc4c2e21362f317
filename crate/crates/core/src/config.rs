use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How a query key is compared with a memory key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Similarity {
    /// `q·k / √C`
    #[default]
    DotProduct,
    /// `−‖q − k‖² / √C`
    NegativeSquaredL2,
}

/// Test-time augmentation branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Augmentation {
    Identity,
    HorizontalFlip,
    Scale075,
    Scale125,
}

impl Augmentation {
    pub fn name(self) -> &'static str {
        match self {
            Augmentation::Identity => "identity",
            Augmentation::HorizontalFlip => "hflip",
            Augmentation::Scale075 => "scale0.75",
            Augmentation::Scale125 => "scale1.25",
        }
    }

    pub fn scale(self) -> f64 {
        match self {
            Augmentation::Scale075 => 0.75,
            Augmentation::Scale125 => 1.25,
            _ => 1.0,
        }
    }

    pub fn flips(self) -> bool {
        self == Augmentation::HorizontalFlip
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Augmentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" | "id" => Ok(Augmentation::Identity),
            "hflip" | "flip" => Ok(Augmentation::HorizontalFlip),
            "scale0.75" | "scale075" => Ok(Augmentation::Scale075),
            "scale1.25" | "scale125" => Ok(Augmentation::Scale125),
            other => Err(Error::Config(format!("unknown augmentation {other:?}"))),
        }
    }
}

/// Every tunable of the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Memory update interval `r`: frame `t` is memorised iff `t % r == 0`.
    pub mem_interval: usize,
    /// Cap on stored memory frames, the permanent first frame included.
    pub max_mem_frames: usize,
    /// Affinities kept per query pixel before the softmax.
    pub topk: usize,
    /// Frames are rescaled so their short side equals this; `None` keeps
    /// the native resolution.
    pub target_short_side: Option<usize>,
    pub channels: usize,
    pub blocks: usize,
    pub queries: usize,
    /// How many of the object queries attend to the foreground region in
    /// masked attention. The rest attend to the background.
    pub foreground_queries: usize,
    pub heads: usize,
    pub similarity: Similarity,
    pub tta: Vec<Augmentation>,
    pub seed: u64,
    pub weights_path: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mem_interval: 3,
            max_mem_frames: 15,
            topk: 60,
            target_short_side: Some(720),
            channels: 32,
            blocks: 3,
            queries: 16,
            foreground_queries: 8,
            heads: 1,
            similarity: Similarity::DotProduct,
            tta: Vec::new(),
            seed: 0,
            weights_path: None,
        }
    }
}

impl EngineConfig {
    /// Paper-scale model width (C = 256).
    pub fn paper_scale() -> Self {
        EngineConfig {
            channels: 256,
            ..Default::default()
        }
    }

    pub fn with_queries(mut self, n: usize) -> Self {
        self.queries = n;
        self.foreground_queries = n / 2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.mem_interval == 0 {
            return fail("memory interval must be >= 1".into());
        }
        if self.max_mem_frames == 0 {
            return fail("memory frame cap must be >= 1".into());
        }
        if self.topk == 0 {
            return fail("top-k must be >= 1".into());
        }
        if self.channels == 0 {
            return fail("channel count must be >= 1".into());
        }
        if self.queries == 0 || self.queries % 2 != 0 {
            return fail(format!("object query count must be even and positive, got {}", self.queries));
        }
        if self.foreground_queries > self.queries {
            return fail("more foreground queries than queries".into());
        }
        if self.heads == 0 || self.channels % self.heads != 0 {
            return fail(format!(
                "{} channels cannot be split into {} heads",
                self.channels, self.heads
            ));
        }
        if self.target_short_side == Some(0) {
            return fail("short side must be >= 1".into());
        }
        Ok(())
    }
}
