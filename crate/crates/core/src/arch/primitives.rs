//! Closed-form parameter and FLOP counts for every primitive.
//!
//! Conventions: normalization costs `2 * C` parameters, bias terms are
//! omitted, FLOPs are twice the multiply-accumulate count. Primitives that
//! cannot change the channel count on their own (pools, identity, channel
//! gates) append a 1x1 adapter plus normalization when `cin != cout`.

use crate::space::{Op, ParamFormula};

/// Groups used by `shuffle_conv`.
pub const SHUFFLE_GROUPS: u64 = 4;

pub fn norm_params(channels: u64) -> u64 {
    2 * channels
}

fn adapter_weights(cin: u64, cout: u64) -> u64 {
    if cin == cout {
        0
    } else {
        cin * cout
    }
}

fn adapter_params(cin: u64, cout: u64) -> u64 {
    if cin == cout {
        0
    } else {
        cin * cout + norm_params(cout)
    }
}

fn gate_hidden(cin: u64) -> u64 {
    (cin / 2).max(1)
}

/// Why a primitive cannot be instantiated at a channel pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMismatch(pub String);

pub fn check_channels(op: Op, cin: u64, cout: u64) -> Result<(), ChannelMismatch> {
    if cin == 0 || cout == 0 {
        return Err(ChannelMismatch(format!("`{op}` with zero channels")));
    }
    if op.param_formula() == ParamFormula::GroupedShuffle
        && (!cin.is_multiple_of(SHUFFLE_GROUPS) || !cout.is_multiple_of(SHUFFLE_GROUPS))
    {
        return Err(ChannelMismatch(format!(
            "`{op}` needs channels divisible by {SHUFFLE_GROUPS}, got {cin}->{cout}"
        )));
    }
    Ok(())
}

/// Weight parameters, excluding normalization.
pub fn op_weights(op: Op, cin: u64, cout: u64) -> u64 {
    match op.param_formula() {
        ParamFormula::Free => adapter_weights(cin, cout),
        ParamFormula::Conv3x3 | ParamFormula::Dilated3x3 => cin * cout * 9,
        ParamFormula::Separable => cin * 9 + cin * cout,
        ParamFormula::ChannelGate => 2 * cin * gate_hidden(cin) + adapter_weights(cin, cout),
        ParamFormula::GroupedShuffle => cin * cout * 9 / SHUFFLE_GROUPS,
    }
}

pub fn op_params(op: Op, cin: u64, cout: u64) -> u64 {
    match op.param_formula() {
        ParamFormula::Free => adapter_params(cin, cout),
        ParamFormula::ChannelGate => 2 * cin * gate_hidden(cin) + adapter_params(cin, cout),
        _ => op_weights(op, cin, cout) + norm_params(cout),
    }
}

/// FLOPs of one primitive producing a `cout x out_h x out_w` map from an
/// `in_h x in_w` input.
pub fn op_flops(op: Op, cin: u64, cout: u64, in_hw: u64, out_hw: u64) -> u64 {
    match op.param_formula() {
        ParamFormula::Free => 2 * adapter_weights(cin, cout) * out_hw,
        ParamFormula::ChannelGate => {
            // gate MLP on the pooled vector, then the per-pixel rescale
            2 * (2 * cin * gate_hidden(cin)) + 2 * cin * in_hw + 2 * adapter_weights(cin, cout) * out_hw
        }
        _ => 2 * op_weights(op, cin, cout) * out_hw,
    }
}

/// 1x1 convolution plus normalization.
pub fn pointwise_params(cin: u64, cout: u64) -> u64 {
    cin * cout + norm_params(cout)
}

/// 3x3 convolution plus normalization.
pub fn conv3x3_params(cin: u64, cout: u64) -> u64 {
    cin * cout * 9 + norm_params(cout)
}
