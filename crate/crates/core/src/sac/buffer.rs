use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Terminal for bootstrapping purposes.
    pub done: bool,
}

impl Transition {
    pub fn validate(&self) -> Result<()> {
        if self.state.len() != self.next_state.len() {
            return Err(Error::Shape("state and next_state lengths differ".into()));
        }
        if self.action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::Usage("action outside [-1, 1]".into()));
        }
        Ok(())
    }
}

/// Fixed-capacity ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self { items: Vec::with_capacity(capacity), capacity, cursor: 0 })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate()?;
        if let Some(first) = self.items.first() {
            if first.state.len() != t.state.len() || first.action.len() != t.action.len() {
                return Err(Error::Shape("transition shape differs from buffer contents".into()));
            }
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sample of `n` distinct transitions.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Batch> {
        if n == 0 || n > self.items.len() {
            return Err(Error::Usage(format!("cannot sample {n} from {} transitions", self.items.len())));
        }
        let picked: Vec<&Transition> = index::sample(rng, self.items.len(), n).iter().map(|i| &self.items[i]).collect();
        Batch::from_transitions(&picked)
    }
}

/// Column-stacked transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Result<Self> {
        let first = ts.first().ok_or_else(|| Error::Usage("empty batch".into()))?;
        let (n, sd, ad) = (ts.len(), first.state.len(), first.action.len());
        let stack = |f: &dyn Fn(&Transition) -> &[f64], width: usize| {
            let flat: Vec<f64> = ts.iter().flat_map(|t| f(t).iter().copied()).collect();
            Array2::from_shape_vec((n, width), flat).map_err(|e| Error::Shape(e.to_string()))
        };
        Ok(Self {
            states: stack(&|t| &t.state, sd)?,
            actions: stack(&|t| &t.action, ad)?,
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_states: stack(&|t| &t.next_state, sd)?,
            dones: ts.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}
