#include "diten/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace diten {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& text) {
    int v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError("config: '" + key + "' expects an integer, got '" + text + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + text + "'");
}

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class Access>
Field real(std::string key, Access access) {
    return {key,
            [key, access](ExperimentConfig& c, const std::string& v) { access(c) = parse_double(key, v); },
            [access](const ExperimentConfig& c) { return fmt_double(access(const_cast<ExperimentConfig&>(c))); }};
}

template <class Access>
Field integer(std::string key, Access access) {
    return {key,
            [key, access](ExperimentConfig& c, const std::string& v) { access(c) = parse_int(key, v); },
            [access](const ExperimentConfig& c) { return std::to_string(access(const_cast<ExperimentConfig&>(c))); }};
}

template <class Access>
Field boolean(std::string key, Access access) {
    return {key,
            [key, access](ExperimentConfig& c, const std::string& v) { access(c) = parse_bool(key, v); },
            [access](const ExperimentConfig& c) { return std::string(access(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(integer("scenario.users", [](ExperimentConfig& c) -> int& { return c.scenario.num_users; }));
        f.push_back(integer("scenario.servers", [](ExperimentConfig& c) -> int& { return c.scenario.num_servers; }));
        f.push_back(real("scenario.area_side", [](ExperimentConfig& c) -> double& { return c.scenario.area_side; }));
        f.push_back(real("scenario.twin_bits_min", [](ExperimentConfig& c) -> double& { return c.scenario.twin_bits.lo; }));
        f.push_back(real("scenario.twin_bits_max", [](ExperimentConfig& c) -> double& { return c.scenario.twin_bits.hi; }));
        f.push_back(real("scenario.fresh_min", [](ExperimentConfig& c) -> double& { return c.scenario.fresh_samples.lo; }));
        f.push_back(real("scenario.fresh_max", [](ExperimentConfig& c) -> double& { return c.scenario.fresh_samples.hi; }));
        f.push_back({"scenario.emd_mode",
                     [](ExperimentConfig& c, const std::string& v) {
                         if (v == "uniform") c.scenario.emd_mode = EmdMode::uniform;
                         else if (v == "per_user") c.scenario.emd_mode = EmdMode::per_user;
                         else throw ConfigError("config: 'scenario.emd_mode' expects uniform|per_user, got '" + v + "'");
                     },
                     [](const ExperimentConfig& c) {
                         return std::string(c.scenario.emd_mode == EmdMode::uniform ? "uniform" : "per_user");
                     }});
        f.push_back(real("scenario.emd", [](ExperimentConfig& c) -> double& { return c.scenario.emd; }));
        f.push_back(real("scenario.emd_min", [](ExperimentConfig& c) -> double& { return c.scenario.emd_range.lo; }));
        f.push_back(real("scenario.emd_max", [](ExperimentConfig& c) -> double& { return c.scenario.emd_range.hi; }));
        f.push_back(integer("scenario.local_epochs", [](ExperimentConfig& c) -> int& { return c.scenario.local_epochs; }));
        f.push_back(integer("scenario.finetune_epochs", [](ExperimentConfig& c) -> int& { return c.scenario.finetune_epochs; }));
        f.push_back(real("scenario.compute_capacity_min", [](ExperimentConfig& c) -> double& { return c.scenario.compute_capacity.lo; }));
        f.push_back(real("scenario.compute_capacity_max", [](ExperimentConfig& c) -> double& { return c.scenario.compute_capacity.hi; }));
        f.push_back(real("scenario.comm_capacity_min", [](ExperimentConfig& c) -> double& { return c.scenario.comm_capacity.lo; }));
        f.push_back(real("scenario.comm_capacity_max", [](ExperimentConfig& c) -> double& { return c.scenario.comm_capacity.hi; }));
        f.push_back(real("scenario.cycles_min", [](ExperimentConfig& c) -> double& { return c.scenario.cycles_per_unit.lo; }));
        f.push_back(real("scenario.cycles_max", [](ExperimentConfig& c) -> double& { return c.scenario.cycles_per_unit.hi; }));
        f.push_back(real("scenario.tx_power_w", [](ExperimentConfig& c) -> double& { return c.scenario.tx_power_w; }));
        f.push_back(real("scenario.bandwidth_hz", [](ExperimentConfig& c) -> double& { return c.scenario.bandwidth_hz; }));
        f.push_back(real("scenario.max_speed", [](ExperimentConfig& c) -> double& { return c.scenario.max_speed; }));
        f.push_back(integer("scenario.slots", [](ExperimentConfig& c) -> int& { return c.scenario.slots; }));

        f.push_back(real("energy.n_mig", [](ExperimentConfig& c) -> double& { return c.scenario.energy.n_mig; }));
        f.push_back(real("energy.n_syn", [](ExperimentConfig& c) -> double& { return c.scenario.energy.n_syn; }));
        f.push_back(real("energy.n_cmp", [](ExperimentConfig& c) -> double& { return c.scenario.energy.n_cmp; }));
        f.push_back(real("energy.channel_gain", [](ExperimentConfig& c) -> double& { return c.scenario.energy.channel_gain; }));
        f.push_back(real("energy.noise_power_w", [](ExperimentConfig& c) -> double& { return c.scenario.energy.noise_power_w; }));
        f.push_back({"energy.noise_dbm",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.scenario.energy.noise_power_w = dbm_to_watts(parse_double("energy.noise_dbm", v));
                     },
                     nullptr});
        f.push_back(real("energy.bits_per_sample", [](ExperimentConfig& c) -> double& { return c.scenario.energy.bits_per_sample; }));

        f.push_back(real("utility.a1", [](ExperimentConfig& c) -> double& { return c.scenario.utility.a1; }));
        f.push_back(real("utility.a2", [](ExperimentConfig& c) -> double& { return c.scenario.utility.a2; }));
        f.push_back(real("utility.a3", [](ExperimentConfig& c) -> double& { return c.scenario.utility.a3; }));
        f.push_back(real("utility.a4", [](ExperimentConfig& c) -> double& { return c.scenario.utility.a4; }));
        f.push_back(real("utility.a5", [](ExperimentConfig& c) -> double& { return c.scenario.utility.a5; }));
        f.push_back(real("utility.a6", [](ExperimentConfig& c) -> double& { return c.scenario.utility.a6; }));

        f.push_back(real("objective.beta1", [](ExperimentConfig& c) -> double& { return c.scenario.beta1; }));
        f.push_back(real("objective.beta2", [](ExperimentConfig& c) -> double& { return c.scenario.beta2; }));
        f.push_back(real("objective.f0", [](ExperimentConfig& c) -> double& { return c.scenario.f0; }));

        f.push_back(real("reward.barrier_curve", [](ExperimentConfig& c) -> double& { return c.reward.barrier_curve; }));
        f.push_back(real("reward.penalty_cap", [](ExperimentConfig& c) -> double& { return c.reward.penalty_cap; }));

        f.push_back(real("ppo.discount", [](ExperimentConfig& c) -> double& { return c.ppo.discount; }));
        f.push_back(real("ppo.gae_lambda", [](ExperimentConfig& c) -> double& { return c.ppo.gae_lambda; }));
        f.push_back(real("ppo.clip", [](ExperimentConfig& c) -> double& { return c.ppo.clip; }));
        f.push_back(real("ppo.actor_lr", [](ExperimentConfig& c) -> double& { return c.ppo.actor_lr; }));
        f.push_back(real("ppo.critic_lr", [](ExperimentConfig& c) -> double& { return c.ppo.critic_lr; }));
        f.push_back(integer("ppo.update_epochs", [](ExperimentConfig& c) -> int& { return c.ppo.update_epochs; }));
        f.push_back(integer("ppo.episodes", [](ExperimentConfig& c) -> int& { return c.ppo.episodes; }));
        f.push_back({"ppo.hidden",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.ppo.hidden.clear();
                         std::stringstream ss(v);
                         std::string item;
                         while (std::getline(ss, item, ',')) c.ppo.hidden.push_back(parse_int("ppo.hidden", item));
                     },
                     [](const ExperimentConfig& c) {
                         std::string out;
                         for (std::size_t i = 0; i < c.ppo.hidden.size(); ++i) {
                             if (i) out += ',';
                             out += std::to_string(c.ppo.hidden[i]);
                         }
                         return out;
                     }});
        f.push_back({"ppo.optimizer",
                     [](ExperimentConfig& c, const std::string& v) {
                         if (v == "sgd") c.ppo.optimizer = OptimizerKind::sgd;
                         else if (v == "adam") c.ppo.optimizer = OptimizerKind::adam;
                         else throw ConfigError("config: 'ppo.optimizer' expects sgd|adam, got '" + v + "'");
                     },
                     [](const ExperimentConfig& c) { return std::string(c.ppo.optimizer == OptimizerKind::sgd ? "sgd" : "adam"); }});
        f.push_back(boolean("ppo.clip_enabled", [](ExperimentConfig& c) -> bool& { return c.ppo.clip_enabled; }));
        f.push_back(boolean("ppo.normalize_advantages", [](ExperimentConfig& c) -> bool& { return c.ppo.normalize_advantages; }));
        f.push_back(boolean("ppo.bootstrap_terminal", [](ExperimentConfig& c) -> bool& { return c.ppo.bootstrap_terminal; }));
        f.push_back(boolean("ppo.pair_skip", [](ExperimentConfig& c) -> bool& { return c.ppo.pair_skip; }));
        f.push_back(real("ppo.pair_skip_lr", [](ExperimentConfig& c) -> double& { return c.ppo.pair_skip_lr; }));

        f.push_back(integer("ddpg.buffer_capacity", [](ExperimentConfig& c) -> int& { return c.ddpg.buffer_capacity; }));
        f.push_back(real("ddpg.tau", [](ExperimentConfig& c) -> double& { return c.ddpg.tau; }));
        f.push_back(real("ddpg.noise_std", [](ExperimentConfig& c) -> double& { return c.ddpg.noise_std; }));
        f.push_back(integer("ddpg.batch_size", [](ExperimentConfig& c) -> int& { return c.ddpg.batch_size; }));
        f.push_back(integer("ddpg.warmup", [](ExperimentConfig& c) -> int& { return c.ddpg.warmup; }));
        f.push_back(integer("ddpg.updates_per_slot", [](ExperimentConfig& c) -> int& { return c.ddpg.updates_per_slot; }));
        f.push_back(real("ddpg.actor_lr", [](ExperimentConfig& c) -> double& { return c.ddpg.actor_lr; }));
        f.push_back(real("ddpg.critic_lr", [](ExperimentConfig& c) -> double& { return c.ddpg.critic_lr; }));

        f.push_back(real("solver.tol", [](ExperimentConfig& c) -> double& { return c.solver.tol; }));
        f.push_back(integer("solver.max_iter", [](ExperimentConfig& c) -> int& { return c.solver.max_iter; }));
        return f;
    }();
    return table;
}

const Field* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return &f;
    return nullptr;
}

void check(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
}

void check_range(const Range& r, const std::string& name, bool allow_zero) {
    check(r.lo <= r.hi, name + " min exceeds max");
    check(allow_zero ? r.lo >= 0.0 : r.lo > 0.0, name + " must be " + (allow_zero ? "non-negative" : "positive"));
}

}  // namespace

void ScenarioConfig::validate() const {
    check(num_users >= 1, "scenario.users must be >= 1");
    check(num_servers >= 1, "scenario.servers must be >= 1");
    check(area_side > 0.0, "scenario.area_side must be positive");
    check_range(twin_bits, "scenario.twin_bits", true);
    check_range(fresh_samples, "scenario.fresh", false);
    check(emd >= 0.0 && emd <= 2.0, "scenario.emd must lie in [0, 2]");
    check(emd_range.lo >= 0.0 && emd_range.hi <= 2.0 && emd_range.lo <= emd_range.hi, "scenario.emd_min/max must lie in [0, 2]");
    check(local_epochs >= 1, "scenario.local_epochs must be >= 1");
    check(finetune_epochs >= 0, "scenario.finetune_epochs must be >= 0");
    check_range(compute_capacity, "scenario.compute_capacity", false);
    check_range(comm_capacity, "scenario.comm_capacity", false);
    check_range(cycles_per_unit, "scenario.cycles", false);
    check(tx_power_w > 0.0 && bandwidth_hz > 0.0, "scenario.tx_power_w and bandwidth_hz must be positive");
    check(max_speed >= 0.0, "scenario.max_speed must be non-negative");
    check(slots >= 1, "scenario.slots must be >= 1");
    check(energy.n_mig >= 0.0 && energy.n_syn >= 0.0 && energy.n_cmp >= 0.0, "energy unit costs must be non-negative");
    check(energy.channel_gain > 0.0 && energy.noise_power_w > 0.0 && energy.bits_per_sample > 0.0,
          "energy.channel_gain, noise and bits_per_sample must be positive");
    check(beta1 > 0.0 && beta1 <= 1.0 && beta2 > 0.0 && beta2 <= 1.0, "objective.beta1/beta2 must lie in (0, 1]");
    check(f0 > 0.0, "objective.f0 must be positive");
    check(utility.a1 > 0 && utility.a2 > 0 && utility.a3 > 0 && utility.a4 > 0 && utility.a6 != 0,
          "utility coefficients a1..a4 must be positive and a6 non-zero");
}

void ExperimentConfig::validate() const {
    scenario.validate();
    check(reward.barrier_curve > 0.0, "reward.barrier_curve must be positive");
    check(reward.penalty_cap > 0.0, "reward.penalty_cap must be positive");
    check(ppo.discount > 0.0 && ppo.discount < 1.0, "ppo.discount must lie in (0, 1)");
    check(ppo.gae_lambda >= 0.0 && ppo.gae_lambda <= 1.0, "ppo.gae_lambda must lie in [0, 1]");
    check(ppo.clip > 0.0 && ppo.clip < 1.0, "ppo.clip must lie in (0, 1)");
    check(ppo.actor_lr > 0.0 && ppo.critic_lr > 0.0 && ppo.pair_skip_lr > 0.0, "ppo learning rates must be positive");
    check(ppo.update_epochs >= 1, "ppo.update_epochs must be >= 1");
    check(ppo.episodes >= 0, "ppo.episodes must be >= 0");
    check(!ppo.hidden.empty(), "ppo.hidden must list at least one layer");
    for (int h : ppo.hidden) check(h >= 1, "ppo.hidden sizes must be >= 1");
    check(ddpg.buffer_capacity >= 1 && ddpg.batch_size >= 1, "ddpg buffer and batch sizes must be >= 1");
    check(ddpg.tau > 0.0 && ddpg.tau <= 1.0, "ddpg.tau must lie in (0, 1]");
    check(ddpg.noise_std >= 0.0, "ddpg.noise_std must be non-negative");
    check(ddpg.actor_lr > 0.0 && ddpg.critic_lr > 0.0, "ddpg learning rates must be positive");
    check(solver.tol > 0.0 && solver.max_iter >= 1, "solver.tol must be positive and max_iter >= 1");
}

void apply_profile(ExperimentConfig& cfg, Profile profile) {
    if (profile == Profile::desk) {
        cfg.scenario.slots = 100;
        cfg.ppo.episodes = 300;
    } else {
        cfg.scenario.slots = 750;
        cfg.ppo.episodes = 500;
    }
}

Profile parse_profile(const std::string& name) {
    if (name == "desk") return Profile::desk;
    if (name == "paper") return Profile::paper;
    throw ConfigError("unknown profile '" + name + "' (expected desk|paper)");
}

ExperimentConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    ExperimentConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + section + "' must live inside a [section]");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            const Field* f = find_field(full);
            if (!f) throw ConfigError("config: unknown key '" + full + "'");
            f->set(cfg, value.get_value<std::string>());
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string render_config(const ExperimentConfig& cfg) {
    std::string out;
    std::string current;
    for (const auto& f : fields()) {
        if (!f.get) continue;
        const auto dot = f.key.find('.');
        const std::string section = f.key.substr(0, dot);
        if (section != current) {
            if (!current.empty()) out += '\n';
            out += "[" + section + "]\n";
            current = section;
        }
        out += f.key.substr(dot + 1) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

}  // namespace diten
