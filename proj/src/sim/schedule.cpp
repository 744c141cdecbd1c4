#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "procsight/campaign.hpp"
#include "procsight/error.hpp"

namespace procsight {

namespace {

std::string sample_id(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, i + 1);
    return buf;
}

constexpr std::uint64_t kScheduleStream = 0x5C4ED;

} // namespace

std::size_t draw_malware_count(Rng& rng, std::span<const std::size_t> history, std::size_t max_count,
                               bool force_nonzero) {
    const bool forced = force_nonzero && history.size() >= 3 &&
                        std::all_of(history.end() - 3, history.end(), [](std::size_t c) { return c == 0; });
    if (forced) return 1 + static_cast<std::size_t>(rng.below(max_count));
    return static_cast<std::size_t>(rng.below(max_count + 1));
}

std::vector<IterationPlan> schedule_campaign(const CampaignConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, kScheduleStream));
    const Timestamp start = parse_timestamp(config.campaign_start);
    const Millis stride{(config.window_secs + config.iteration_gap_secs) * 1000};

    std::vector<std::size_t> malicious(config.n_malicious);
    std::iota(malicious.begin(), malicious.end(), 0);
    rng.shuffle(std::span<std::size_t>(malicious));

    // Benign samples not yet executed are preferred, so the whole pool runs
    // before any sample repeats.
    std::vector<std::size_t> unused(config.n_benign);
    std::iota(unused.begin(), unused.end(), 0);
    rng.shuffle(std::span<std::size_t>(unused));
    std::size_t unused_next = 0;

    const std::size_t iterations_without_malware =
        config.n_malicious == 0 ? (config.n_benign + config.n_vms - 1) / config.n_vms : 0;

    std::vector<IterationPlan> plans;
    std::vector<std::size_t> history;
    std::size_t next_malicious = 0;
    while (config.n_malicious > 0 ? next_malicious < malicious.size() : plans.size() < iterations_without_malware) {
        IterationPlan plan;
        plan.index = plans.size();
        plan.start_time = start + stride * static_cast<std::int64_t>(plan.index);

        std::size_t count = 0;
        if (config.n_malicious > 0) {
            count = draw_malware_count(rng, history, config.max_malware_per_iteration, config.force_nonzero);
            count = std::min(count, malicious.size() - next_malicious);
        }
        history.push_back(count);
        plan.malware_count = count;

        std::vector<std::size_t> vms(config.n_vms);
        std::iota(vms.begin(), vms.end(), 0);
        rng.shuffle(std::span<std::size_t>(vms));

        std::set<std::size_t> taken;
        plan.assignments.resize(config.n_vms);
        for (std::size_t slot = 0; slot < config.n_vms; ++slot) {
            Assignment& a = plan.assignments[vms[slot]];
            a.vm = vms[slot];
            if (slot < count) {
                a.sample_id = sample_id("mal", malicious[next_malicious++]);
                a.label = Label::malicious;
                continue;
            }
            std::size_t pick;
            if (unused_next < unused.size()) {
                pick = unused[unused_next++];
            } else {
                do {
                    pick = static_cast<std::size_t>(rng.below(config.n_benign));
                } while (taken.count(pick));
            }
            taken.insert(pick);
            a.sample_id = sample_id("ben", pick);
            a.label = Label::benign;
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

} // namespace procsight
