#include "cpg/ledger.hpp"

#include <algorithm>
#include <string>

#include "cpg/error.hpp"

namespace cpg {

Ledger::Ledger(std::size_t n_params) : owners_(n_params, kFree) {
    if (n_params == 0) throw DimensionError("ledger needs at least one parameter");
}

Ledger Ledger::from_owners(std::vector<TaskId> owners, TaskId committed) {
    Ledger l(owners.size());
    for (auto o : owners)
        if (o > committed) throw OwnershipError("owner tag " + std::to_string(o) + " exceeds committed task count");
    l.owners_ = std::move(owners);
    l.committed_ = committed;
    return l;
}

void Ledger::commit_task(TaskId task, std::span<const std::size_t> surviving) {
    if (task != committed_ + 1)
        throw OwnershipError("commit of task " + std::to_string(task) + " out of order; next is " +
                             std::to_string(committed_ + 1));
    for (auto i : surviving) {
        if (i >= owners_.size()) throw OwnershipError("surviving index " + std::to_string(i) + " out of range");
        if (owners_[i] != kFree)
            throw OwnershipError("index " + std::to_string(i) + " already owned by task " +
                                 std::to_string(owners_[i]));
    }
    for (auto i : surviving) owners_[i] = task;
    committed_ = task;
}

void Ledger::extend(std::size_t added) { owners_.resize(owners_.size() + added, kFree); }

std::vector<std::size_t> Ledger::free_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < owners_.size(); ++i)
        if (owners_[i] == kFree) out.push_back(i);
    return out;
}

std::size_t Ledger::free_count() const {
    return static_cast<std::size_t>(std::count(owners_.begin(), owners_.end(), kFree));
}

std::size_t Ledger::owned_count(TaskId task) const {
    return static_cast<std::size_t>(std::count(owners_.begin(), owners_.end(), task));
}

std::vector<std::size_t> Ledger::prior_indices(TaskId task) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < owners_.size(); ++i)
        if (owners_[i] != kFree && owners_[i] < task) out.push_back(i);
    return out;
}

std::vector<float> compose_view(const Ledger& ledger, std::span<const float> params, TaskId task,
                                std::span<const std::uint8_t> pick_mask, bool include_free) {
    if (params.size() != ledger.size()) throw DimensionError("params and ledger differ in length");
    const auto& owners = ledger.owners();
    std::vector<float> view(params.size(), 0.0f);
    std::size_t j = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const TaskId o = owners[i];
        if (o == task) {
            view[i] = params[i];
        } else if (o == kFree) {
            if (include_free) view[i] = params[i];
        } else if (o < task) {
            if (j >= pick_mask.size()) throw DimensionError("pick mask shorter than prior-owned set");
            if (pick_mask[j++]) view[i] = params[i];
        }
    }
    if (j != pick_mask.size())
        throw DimensionError("pick mask has " + std::to_string(pick_mask.size()) + " bits, prior-owned set has " +
                             std::to_string(j));
    return view;
}

std::size_t grow(Ledger& ledger, nn::Network& net, std::span<const std::size_t> increments) {
    if (ledger.size() != net.param_count()) throw DimensionError("ledger and network differ in length");
    const std::size_t added = nn::grow(net, increments);
    ledger.extend(added);
    return added;
}

}  // namespace cpg
