#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "seqplan/bandwidth.hpp"
#include "seqplan/strategy.hpp"

namespace seqplan {

enum class GroupKind { TpSp, Ps, Oss, Gs, Dp };

inline const char* to_string(GroupKind k) {
    switch (k) {
        case GroupKind::TpSp: return "tp/sp";
        case GroupKind::Ps: return "ps";
        case GroupKind::Oss: return "oss";
        case GroupKind::Gs: return "gs";
        case GroupKind::Dp: return "dp";
    }
    return "?";
}

/// Axis assignment for every process-group kind the estimator prices.
struct MeshPlacement {
    std::map<GroupKind, MeshAxis> axis;

    MeshAxis operator[](GroupKind k) const { return axis.at(k); }
};

/// Assigns each process group to the intra- or inter-node axis.
///
/// Ranks are laid out with the tp/sp group innermost (stride 1), parameter
/// sharding next, then optimizer-state sharding, so a group with stride t and
/// size g spans t*g consecutive ranks. A group is intra when its span fits in
/// one node, mixed when it straddles nodes but members still share nodes, and
/// inter otherwise. Mixed groups are priced with the inter curve.
inline MeshPlacement place_groups(const ClusterConfig& cluster, const Strategy& s) {
    const std::int64_t gpn = cluster.gpus_per_node;
    auto classify = [&](std::int64_t stride, std::int64_t size) {
        if (size <= 1) return MeshAxis::Intra;
        const std::int64_t span = stride * size;
        if (span <= gpn) return MeshAxis::Intra;
        if (stride < gpn) return MeshAxis::Mixed;
        return MeshAxis::Inter;
    };
    const std::int64_t N = cluster.total_gpus;
    const std::int64_t act_group = std::max(s.tp, s.sp);  // innermost mesh dim
    const std::int64_t grad_sync = N / (s.pp * s.tp * s.ps);

    MeshPlacement placement;
    placement.axis[GroupKind::TpSp] = classify(1, act_group);
    placement.axis[GroupKind::Ps] = classify(act_group, s.ps);
    placement.axis[GroupKind::Oss] = classify(act_group * s.ps, s.oss);
    placement.axis[GroupKind::Gs] = classify(act_group * s.ps, grad_sync);
    placement.axis[GroupKind::Dp] = classify(s.sp, s.dp);
    return placement;
}

}  // namespace seqplan
