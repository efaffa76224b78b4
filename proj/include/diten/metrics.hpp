#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace diten {

/// One environment slot as persisted to the JSONL stream.
struct SlotRecord {
    int episode = 0;
    int slot = 0;
    double objective = 0.0;
    double reward = 0.0;
    double utility_mean = 0.0;  // clamped to [0, 1] per user before averaging
    double cost_mig = 0.0;      // summed over servers
    double cost_syn = 0.0;
    double cost_cmp = 0.0;
    bool feasible = true;
    int migrations = 0;
    double gamma_mean = 0.0;
    std::string alloc_status;
};

/// Per-episode means of the slot records.
struct EpisodeSummary {
    int episode = 0;
    int slots = 0;
    double objective = 0.0;
    double reward = 0.0;
    double utility_mean = 0.0;
    double cost_mig = 0.0;
    double cost_syn = 0.0;
    double cost_cmp = 0.0;
    double feasible = 0.0;  // fraction of feasible slots
    double migrations = 0.0;

    double cost_total() const { return cost_mig + cost_syn + cost_cmp; }
};

EpisodeSummary summarize(int episode, const std::vector<SlotRecord>& slots);

std::string to_json_line(const SlotRecord& r);
SlotRecord slot_from_json(const std::string& line);

inline constexpr const char* kEpisodeCsvHeader =
    "episode,slot,objective,utility_mean,cost_mig,cost_syn,cost_cmp,feasible,reward";
std::string to_csv_row(const EpisodeSummary& e);

class MetricsSink {
public:
    virtual ~MetricsSink() = default;
    virtual void on_slot(const SlotRecord&) {}
    virtual void on_episode(const EpisodeSummary&) {}
};

class MemorySink : public MetricsSink {
public:
    void on_slot(const SlotRecord& r) override { slots.push_back(r); }
    void on_episode(const EpisodeSummary& e) override { episodes.push_back(e); }

    std::vector<SlotRecord> slots;
    std::vector<EpisodeSummary> episodes;
};

/// JSONL stream of every slot plus a CSV with one row per episode.
class FileSink : public MetricsSink {
public:
    FileSink(const std::filesystem::path& jsonl, const std::filesystem::path& csv);
    void on_slot(const SlotRecord& r) override;
    void on_episode(const EpisodeSummary& e) override;

private:
    std::ofstream jsonl_;
    std::ofstream csv_;
};

/// Forwards to several sinks in order.
class TeeSink : public MetricsSink {
public:
    explicit TeeSink(std::vector<MetricsSink*> sinks) : sinks_(std::move(sinks)) {}
    void on_slot(const SlotRecord& r) override {
        for (auto* s : sinks_) s->on_slot(r);
    }
    void on_episode(const EpisodeSummary& e) override {
        for (auto* s : sinks_) s->on_episode(e);
    }

private:
    std::vector<MetricsSink*> sinks_;
};

/// Reads a JSONL metrics file back. Throws std::runtime_error on malformed lines.
std::vector<SlotRecord> read_jsonl(const std::filesystem::path& path);

/// Rebuilds per-episode summaries from slot records (episode order preserved).
std::vector<EpisodeSummary> summarize_all(const std::vector<SlotRecord>& records);

/// Shortest round-trip decimal rendering.
std::string format_double(double v);

}  // namespace diten
