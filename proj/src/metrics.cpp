#include "diten/metrics.hpp"

#include <charconv>
#include <stdexcept>

#include <json.hpp>

namespace diten {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

EpisodeSummary summarize(int episode, const std::vector<SlotRecord>& slots) {
    EpisodeSummary e;
    e.episode = episode;
    e.slots = static_cast<int>(slots.size());
    if (slots.empty()) return e;
    for (const auto& r : slots) {
        e.objective += r.objective;
        e.reward += r.reward;
        e.utility_mean += r.utility_mean;
        e.cost_mig += r.cost_mig;
        e.cost_syn += r.cost_syn;
        e.cost_cmp += r.cost_cmp;
        e.feasible += r.feasible ? 1.0 : 0.0;
        e.migrations += r.migrations;
    }
    const double n = static_cast<double>(slots.size());
    e.objective /= n;
    e.reward /= n;
    e.utility_mean /= n;
    e.cost_mig /= n;
    e.cost_syn /= n;
    e.cost_cmp /= n;
    e.feasible /= n;
    e.migrations /= n;
    return e;
}

std::string to_json_line(const SlotRecord& r) {
    nlohmann::ordered_json j;
    j["episode"] = r.episode;
    j["slot"] = r.slot;
    j["objective"] = r.objective;
    j["reward"] = r.reward;
    j["utility_mean"] = r.utility_mean;
    j["cost_mig"] = r.cost_mig;
    j["cost_syn"] = r.cost_syn;
    j["cost_cmp"] = r.cost_cmp;
    j["feasible"] = r.feasible;
    j["migrations"] = r.migrations;
    j["gamma_mean"] = r.gamma_mean;
    j["alloc_status"] = r.alloc_status;
    return j.dump();
}

SlotRecord slot_from_json(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    SlotRecord r;
    r.episode = j.at("episode").get<int>();
    r.slot = j.at("slot").get<int>();
    r.objective = j.at("objective").get<double>();
    r.reward = j.at("reward").get<double>();
    r.utility_mean = j.at("utility_mean").get<double>();
    r.cost_mig = j.at("cost_mig").get<double>();
    r.cost_syn = j.at("cost_syn").get<double>();
    r.cost_cmp = j.at("cost_cmp").get<double>();
    r.feasible = j.at("feasible").get<bool>();
    r.migrations = j.at("migrations").get<int>();
    r.gamma_mean = j.at("gamma_mean").get<double>();
    r.alloc_status = j.at("alloc_status").get<std::string>();
    return r;
}

std::string to_csv_row(const EpisodeSummary& e) {
    std::string row = std::to_string(e.episode) + ',' + std::to_string(e.slots);
    for (double v : {e.objective, e.utility_mean, e.cost_mig, e.cost_syn, e.cost_cmp, e.feasible, e.reward})
        row += ',' + format_double(v);
    return row;
}

FileSink::FileSink(const std::filesystem::path& jsonl, const std::filesystem::path& csv)
    : jsonl_(jsonl, std::ios::binary), csv_(csv, std::ios::binary) {
    if (!jsonl_ || !csv_) throw std::runtime_error("cannot open metrics output in " + jsonl.parent_path().string());
    csv_ << kEpisodeCsvHeader << '\n';
}

void FileSink::on_slot(const SlotRecord& r) { jsonl_ << to_json_line(r) << '\n'; }

void FileSink::on_episode(const EpisodeSummary& e) {
    csv_ << to_csv_row(e) << '\n';
    jsonl_.flush();
    csv_.flush();
}

std::vector<SlotRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<SlotRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(slot_from_json(line));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<EpisodeSummary> summarize_all(const std::vector<SlotRecord>& records) {
    std::vector<EpisodeSummary> out;
    std::vector<SlotRecord> current;
    for (const auto& r : records) {
        if (!current.empty() && current.back().episode != r.episode) {
            out.push_back(summarize(current.back().episode, current));
            current.clear();
        }
        current.push_back(r);
    }
    if (!current.empty()) out.push_back(summarize(current.back().episode, current));
    return out;
}

}  // namespace diten
