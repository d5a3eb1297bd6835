#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crowdforge/error.hpp"
#include "crowdforge/tape.hpp"

namespace crowdforge {

// Named parameter groups with parallel gradient buffers and Adam state.
// All learnable symbols (network weights, selector weights, crowd-layer
// weights) live here; one store is confined to one training run.
class ParameterStore {
public:
    using GroupId = std::size_t;

    GroupId add_group(std::string name, std::vector<std::size_t> shape) {
        if (by_name_.contains(name))
            throw ContractError("parameter group already exists: " + name);
        std::size_t size = 1;
        for (std::size_t dim : shape) size *= dim;
        if (size == 0) throw ContractError("parameter group has zero size: " + name);
        Group group;
        group.name = std::move(name);
        group.shape = std::move(shape);
        group.values.assign(size, 0.0);
        group.grads.assign(size, 0.0);
        group.adam_m.assign(size, 0.0);
        group.adam_v.assign(size, 0.0);
        by_name_.emplace(group.name, groups_.size());
        groups_.push_back(std::move(group));
        return groups_.size() - 1;
    }

    bool has_group(std::string_view name) const {
        return by_name_.contains(std::string(name));
    }

    GroupId group_id(std::string_view name) const {
        const auto it = by_name_.find(std::string(name));
        if (it == by_name_.end())
            throw ContractError("unknown parameter group: " + std::string(name));
        return it->second;
    }

    std::size_t group_count() const { return groups_.size(); }
    const std::string& name(GroupId id) const { return group(id).name; }
    const std::vector<std::size_t>& shape(GroupId id) const { return group(id).shape; }

    std::span<double> values(GroupId id) { return group(id).values; }
    std::span<const double> values(GroupId id) const { return group(id).values; }
    std::span<double> values(std::string_view name) { return values(group_id(name)); }
    std::span<const double> values(std::string_view name) const { return values(group_id(name)); }

    std::span<double> grads(GroupId id) { return group(id).grads; }
    std::span<const double> grads(GroupId id) const { return group(id).grads; }
    std::span<double> grads(std::string_view name) { return grads(group_id(name)); }

    std::span<double> adam_m(GroupId id) { return group(id).adam_m; }
    std::span<double> adam_v(GroupId id) { return group(id).adam_v; }

    void zero_gradients() {
        for (Group& group : groups_)
            std::fill(group.grads.begin(), group.grads.end(), 0.0);
    }

    void reset_optimizer_state() {
        for (Group& group : groups_) {
            std::fill(group.adam_m.begin(), group.adam_m.end(), 0.0);
            std::fill(group.adam_v.begin(), group.adam_v.end(), 0.0);
        }
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const Group& group : groups_) n += group.values.size();
        return n;
    }

    std::vector<std::vector<double>> snapshot_values() const {
        std::vector<std::vector<double>> snap;
        snap.reserve(groups_.size());
        for (const Group& group : groups_) snap.push_back(group.values);
        return snap;
    }

    void restore_values(const std::vector<std::vector<double>>& snap) {
        if (snap.size() != groups_.size())
            throw ContractError("restore_values: snapshot group count mismatch");
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            if (snap[g].size() != groups_[g].values.size())
                throw ContractError("restore_values: snapshot shape mismatch");
            groups_[g].values = snap[g];
        }
    }

private:
    struct Group {
        std::string name;
        std::vector<std::size_t> shape;
        std::vector<double> values;
        std::vector<double> grads;
        std::vector<double> adam_m;
        std::vector<double> adam_v;
    };

    Group& group(GroupId id) {
        if (id >= groups_.size()) throw ContractError("parameter group id out of range");
        return groups_[id];
    }
    const Group& group(GroupId id) const {
        if (id >= groups_.size()) throw ContractError("parameter group id out of range");
        return groups_[id];
    }

    std::vector<Group> groups_;
    std::unordered_map<std::string, GroupId> by_name_;
};

// Exposes store parameters as tape leaves, one node per parameter per tape,
// created on first use so every sample in a batch shares the same leaf.
class ParamBinding {
public:
    ParamBinding(Tape& tape, ParameterStore& store) : tape_(&tape), store_(&store) {}

    NodeId operator()(ParameterStore::GroupId group, std::size_t index) {
        if (node_cache_.size() < store_->group_count())
            node_cache_.resize(store_->group_count());
        auto& cache = node_cache_[group];
        if (cache.empty()) cache.assign(store_->values(group).size(), kNoNode);
        if (index >= cache.size())
            throw ContractError("parameter index out of range in group " + store_->name(group));
        if (cache[index] == kNoNode) {
            cache[index] = tape_->leaf(store_->values(group)[index]);
            refs_.push_back({cache[index], group, index});
        }
        return cache[index];
    }

    // Adds the tape gradients of every bound parameter into the store's
    // gradient buffers. Call after Tape::backward.
    void accumulate_gradients() {
        for (const Ref& ref : refs_)
            store_->grads(ref.group)[ref.index] += tape_->gradient(ref.node);
    }

private:
    struct Ref {
        NodeId node;
        ParameterStore::GroupId group;
        std::size_t index;
    };

    Tape* tape_;
    ParameterStore* store_;
    std::vector<std::vector<NodeId>> node_cache_;
    std::vector<Ref> refs_;
};

// Backward pass from a scalar loss node plus gradient harvest into the store.
inline void reverse_gradients(Tape& tape, NodeId loss, ParamBinding& binding) {
    tape.backward(loss);
    binding.accumulate_gradients();
}

} // namespace crowdforge
