//! State encoders and the actor/critic heads.
//!
//! Every controller variant shares the same two heads: a policy that
//! maps one encoded row per platoon to a bounded acceleration, and a
//! centralized critic that scores state-action rows and sums them into
//! one fleet value (the global reward is likewise a sum over platoon
//! leaders). The variants differ only in how the nested graph becomes
//! those rows, and the [`EncodeStats`] counters make that wiring
//! observable from the outside.

use rand_chacha::ChaCha8Rng;

use crate::graph::{
    build_ff_graph, build_vv_graph_counted, nest, NestedTrafficGraph, NormConstants,
    StWeightParams, F_F, F_V,
};
use crate::linalg::Mat;
use crate::nn::layers::{Activation, Dense, GatLayer, WeightInjection};
use crate::nn::store::ParameterStore;
use crate::nn::tape::{Tape, TensorId};
use crate::nn::NnError;
use crate::rl::{Ablation, RlError};
use crate::sim::WorldState;

/// Architecture sizes shared by the actor, critic, and encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Attention heads per layer.
    pub heads: usize,
    /// Per-head width of the hidden vehicle-level attention layer
    /// (heads concatenate, so its output is `heads * this`).
    pub vv_hidden_head_dim: usize,
    /// Width of the vehicle-level embedding (final layer averages heads).
    pub vv_embed_dim: usize,
    /// Width of the platoon-level embedding.
    pub ff_embed_dim: usize,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    /// Action magnitude cap, m/s^2.
    pub action_bound: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            heads: 4,
            vv_hidden_head_dim: 16,
            vv_embed_dim: 32,
            ff_embed_dim: 16,
            actor_hidden: 64,
            critic_hidden: 64,
            action_bound: 4.5,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let dims = [
            ("heads", self.heads),
            ("vv_hidden_head_dim", self.vv_hidden_head_dim),
            ("vv_embed_dim", self.vv_embed_dim),
            ("ff_embed_dim", self.ff_embed_dim),
            ("actor_hidden", self.actor_hidden),
            ("critic_hidden", self.critic_hidden),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(RlError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.action_bound > 0.0 && self.action_bound.is_finite()) {
            return Err(RlError::Config("action_bound must be positive".into()));
        }
        Ok(())
    }
}

/// Counters that expose which encoder mechanisms actually ran. Each
/// controller variant has a distinct zero/nonzero signature across the
/// four fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeStats {
    /// Vehicle-level attention passes (one per platoon per encode).
    pub vv_attention_passes: u64,
    /// Platoon-level attention passes (one per encode).
    pub ff_attention_passes: u64,
    /// Spatio-temporal weight evaluations during graph construction.
    pub st_weight_evals: u64,
    /// Encodes that bypassed attention and used raw feature rows.
    pub raw_bypass_encodes: u64,
}

/// Builds the nested observation for one controller variant, counting
/// spatio-temporal weight evaluations into `stats`.
pub fn observe(
    world: &WorldState,
    stw: &StWeightParams,
    norm: &NormConstants,
    ablation: Ablation,
    stats: &mut EncodeStats,
) -> Result<NestedTrafficGraph, RlError> {
    let vv = build_vv_graph_counted(
        world,
        stw,
        ablation.vv_scheme(),
        norm,
        Some(&mut stats.st_weight_evals),
    )?;
    let ff = build_ff_graph(world, norm, ablation.ff_scheme(), stw)?;
    let membership = world.vehicles.iter().map(|v| v.group).collect();
    Ok(nest(vv, ff, membership)?)
}

/// The full parameter layout for one controller variant: optional graph
/// encoders plus the shared actor and critic stacks. Parameters live in
/// a [`ParameterStore`] under the prefixes `enc_vv/`, `enc_ff/`,
/// `actor/`, and `critic/`.
#[derive(Debug, Clone)]
pub struct Networks {
    pub ablation: Ablation,
    pub net: NetConfig,
    vv_hidden: Option<GatLayer>,
    vv_final: Option<GatLayer>,
    ff_gat: Option<GatLayer>,
    actor: Vec<Dense>,
    critic: Vec<Dense>,
}

impl Networks {
    /// Width of one encoded state row under a given variant.
    pub fn state_dim(ablation: Ablation, net: &NetConfig) -> usize {
        match ablation {
            Ablation::Ddpg => F_V + F_F,
            Ablation::Mgat | Ablation::Stw => net.vv_embed_dim + F_F,
            Ablation::Nstw => net.vv_embed_dim + net.ff_embed_dim,
        }
    }

    pub fn init(
        store: &mut ParameterStore,
        rng: &mut ChaCha8Rng,
        ablation: Ablation,
        net: NetConfig,
    ) -> Result<Networks, NnError> {
        let (vv_hidden, vv_final) = if ablation.uses_vv_attention() {
            let hidden = GatLayer::init(
                store,
                rng,
                "enc_vv/hidden",
                F_V,
                net.vv_hidden_head_dim,
                net.heads,
                WeightInjection::LogOffset,
                false,
                Activation::Tanh,
            )?;
            let final_ = GatLayer::init(
                store,
                rng,
                "enc_vv/final",
                hidden.out_dim(),
                net.vv_embed_dim,
                net.heads,
                WeightInjection::LogOffset,
                true,
                Activation::Tanh,
            )?;
            (Some(hidden), Some(final_))
        } else {
            (None, None)
        };
        let ff_gat = if ablation.uses_ff_attention() {
            Some(GatLayer::init(
                store,
                rng,
                "enc_ff/gat",
                F_F,
                net.ff_embed_dim,
                net.heads,
                WeightInjection::LogOffset,
                true,
                Activation::Tanh,
            )?)
        } else {
            None
        };

        let state = Networks::state_dim(ablation, &net);
        let actor = vec![
            Dense::init(store, rng, "actor/l0", state, net.actor_hidden, Activation::Tanh)?,
            Dense::init(
                store,
                rng,
                "actor/l1",
                net.actor_hidden,
                net.actor_hidden,
                Activation::Tanh,
            )?,
            Dense::init(
                store,
                rng,
                "actor/out",
                net.actor_hidden,
                1,
                Activation::ScaledTanh(net.action_bound),
            )?,
        ];
        let critic = vec![
            Dense::init(
                store,
                rng,
                "critic/l0",
                state + 1,
                net.critic_hidden,
                Activation::Tanh,
            )?,
            Dense::init(
                store,
                rng,
                "critic/l1",
                net.critic_hidden,
                net.critic_hidden,
                Activation::Tanh,
            )?,
            Dense::init(store, rng, "critic/out", net.critic_hidden, 1, Activation::Linear)?,
        ];
        Ok(Networks {
            ablation,
            net,
            vv_hidden,
            vv_final,
            ff_gat,
            actor,
            critic,
        })
    }

    /// Expected parameter names and shapes, for checkpoint validation.
    pub fn shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        if let Some(l) = &self.vv_hidden {
            out.extend(l.shapes());
        }
        if let Some(l) = &self.vv_final {
            out.extend(l.shapes());
        }
        if let Some(l) = &self.ff_gat {
            out.extend(l.shapes());
        }
        for d in self.actor.iter().chain(&self.critic) {
            out.extend(d.shapes());
        }
        out
    }

    /// Encodes the nested observation into one state row per platoon,
    /// in platoon order.
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        graph: &NestedTrafficGraph,
        stats: &mut EncodeStats,
    ) -> Result<TensorId, NnError> {
        let ff = tape.leaf(graph.ff.features.clone());
        if self.ablation == Ablation::Ddpg {
            let vv = tape.leaf(graph.vv.features.clone());
            let rows = graph.cav_rows();
            let picked = tape.gather_rows(vv, &rows);
            stats.raw_bypass_encodes += 1;
            return Ok(tape.concat_cols(picked, ff));
        }

        let hidden = self.vv_hidden.as_ref().expect("variant has a V-V encoder");
        let final_ = self.vv_final.as_ref().expect("variant has a V-V encoder");
        let vv = tape.leaf(graph.vv.features.clone());
        let mut stacked: Option<TensorId> = None;
        for g in 0..graph.platoon_count() {
            let members = graph.platoon_members(g);
            let adj = graph.platoon_adjacency(g);
            let h = tape.gather_rows(vv, &members);
            let h = hidden.forward(tape, store, h, &adj)?.out;
            let out = final_.forward(tape, store, h, &adj)?.out;
            let lead = members
                .iter()
                .position(|&r| graph.vv.features.get(r, 2) == 0.5)
                .ok_or_else(|| NnError::Shape(format!("platoon {g} has no leader row")))?;
            let row = tape.gather_rows(out, &[lead]);
            stacked = Some(match stacked {
                None => row,
                Some(s) => tape.concat_rows(s, row),
            });
            stats.vv_attention_passes += 1;
        }
        let stacked =
            stacked.ok_or_else(|| NnError::Shape("observation has no platoons".into()))?;

        let ff_part = if let Some(gat) = &self.ff_gat {
            stats.ff_attention_passes += 1;
            gat.forward(tape, store, ff, &graph.ff.adjacency)?.out
        } else {
            ff
        };
        Ok(tape.concat_cols(stacked, ff_part))
    }

    /// One bounded acceleration per state row.
    pub fn actor_forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        state: TensorId,
    ) -> Result<TensorId, NnError> {
        let mut x = state;
        for layer in &self.actor {
            x = layer.forward(tape, store, x)?;
        }
        Ok(x)
    }

    /// Fleet value: per-row scores summed into a single scalar.
    pub fn critic_forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        state: TensorId,
        action: TensorId,
    ) -> Result<TensorId, NnError> {
        let mut x = tape.concat_cols(state, action);
        for layer in &self.critic {
            x = layer.forward(tape, store, x)?;
        }
        Ok(tape.sum_all(x))
    }

    /// Forward-only policy evaluation: encode, run the actor, and read
    /// the action column.
    pub fn policy_actions(
        &self,
        store: &ParameterStore,
        graph: &NestedTrafficGraph,
        stats: &mut EncodeStats,
    ) -> Result<Vec<f64>, NnError> {
        let mut tape = Tape::new();
        let state = self.encode(&mut tape, store, graph, stats)?;
        let act = self.actor_forward(&mut tape, store, state)?;
        let m = tape.value(act);
        Ok((0..m.rows()).map(|i| m.get(i, 0)).collect())
    }
}

/// Action column as a leaf tensor.
pub fn action_leaf(tape: &mut Tape, actions: &[f64]) -> TensorId {
    tape.leaf(Mat::col_from(actions))
}
