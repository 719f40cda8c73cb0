#include "sdde/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <utility>

#include <json.hpp>

namespace sdde {

std::string_view to_string(CheckStatus s) noexcept {
    switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::skip: return "skip";
    }
    return "skip";
}

double Slack::at(double bound) const noexcept { return absolute + relative * std::fabs(bound); }

Slack slack_for(std::string_view id) noexcept {
    struct Entry {
        std::string_view prefix;
        Slack slack;
    };
    // Longest matching prefix wins.
    static constexpr Entry table[] = {
        {"sobolev", {1e-9, 0.0}},
        {"ev_lipschitz", {1e-9, 0.0}},
        {"segment_lipschitz", {1e-9, 0.0}},
        {"tau_envelope", {1e-8, 0.0}},
        {"tau_lipschitz", {1e-6, 0.0}},
        {"y_growth", {1e-9, 0.0}},
        {"y_history_lipschitz", {1e-6, 0.0}},
        {"calG_domination", {1e-9, 0.0}},
        {"calG_lipschitz_stability", {0.0, 0.0}},
        {"rhs_local_bound", {0.0, 1e-9}},
        {"apriori_w", {1e-7, 0.0}}, // measured against |phi(0)| after dividing by e^{t M_q}
        {"apriori_v", {0.0, 1e-6}},
        {"deriv_bound", {0.0, 1e-6}},
        {"voc_residual", {0.0, 0.0}},
        {"g.lower_bound", {0.0, 0.0}},
        {"g.upper_bound", {0.0, 0.0}},
        {"d1g.consistency", {0.0, 0.0}},
    };
    const Entry* best = nullptr;
    for (const auto& e : table)
        if (id.substr(0, e.prefix.size()) == e.prefix && (!best || e.prefix.size() > best->prefix.size())) best = &e;
    return best ? best->slack : Slack{};
}

CheckItem& CheckReport::add_bound(std::string id, double measured, double bound, std::string context) {
    CheckItem item;
    item.measured = measured;
    item.bound = bound;
    item.margin = bound - measured;
    const Slack s = slack_for(id);
    const bool ok = std::isfinite(item.margin) && item.margin >= -s.at(bound);
    item.status = ok ? CheckStatus::pass : CheckStatus::fail;
    item.check_id = std::move(id);
    item.context = std::move(context);
    items_.push_back(std::move(item));
    return items_.back();
}

CheckItem& CheckReport::add_lower_bound(std::string id, double measured, double bound, std::string context) {
    CheckItem& item = add_bound(std::move(id), measured, bound, std::move(context));
    item.margin = measured - bound;
    const bool ok = std::isfinite(item.margin) && item.margin >= -slack_for(item.check_id).at(bound);
    item.status = ok ? CheckStatus::pass : CheckStatus::fail;
    return item;
}

CheckItem& CheckReport::add_flag(std::string id, bool ok, std::string context, double measured, double bound) {
    CheckItem item{std::move(id), ok ? CheckStatus::pass : CheckStatus::fail, measured, bound, bound - measured,
                   std::move(context)};
    items_.push_back(std::move(item));
    return items_.back();
}

CheckItem& CheckReport::add_skip(std::string id, std::string context) {
    items_.push_back(CheckItem{std::move(id), CheckStatus::skip, 0.0, 0.0, 0.0, std::move(context)});
    return items_.back();
}

void CheckReport::add(CheckItem item) { items_.push_back(std::move(item)); }

void CheckReport::merge(const CheckReport& other) {
    items_.insert(items_.end(), other.items_.begin(), other.items_.end());
}

bool CheckReport::all_pass() const noexcept {
    return std::none_of(items_.begin(), items_.end(), [](const CheckItem& i) { return i.status == CheckStatus::fail; });
}

const CheckItem* CheckReport::find(std::string_view id) const noexcept {
    for (const auto& i : items_)
        if (i.check_id == id) return &i;
    return nullptr;
}

std::string CheckReport::to_json() const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    auto num = [](double x) -> nlohmann::ordered_json {
        if (std::isfinite(x)) return x;
        return nullptr;
    };
    for (const auto& i : items_) {
        nlohmann::ordered_json j;
        j["check_id"] = i.check_id;
        j["status"] = std::string(to_string(i.status));
        j["measured"] = num(i.measured);
        j["bound"] = num(i.bound);
        j["margin"] = num(i.margin);
        j["context"] = i.context;
        arr.push_back(std::move(j));
    }
    return arr.dump(2);
}

void CheckReport::print_table(std::ostream& os) const {
    std::size_t width = 8;
    for (const auto& i : items_) width = std::max(width, i.check_id.size());
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-*s  %-4s  %14s  %14s  %14s  %s\n", static_cast<int>(width), "check", "stat",
                  "measured", "bound", "margin", "context");
    os << buf;
    for (const auto& i : items_) {
        std::snprintf(buf, sizeof buf, "%-*s  %-4s  %14.6e  %14.6e  %14.6e  %s\n", static_cast<int>(width),
                      i.check_id.c_str(), std::string(to_string(i.status)).c_str(), i.measured, i.bound, i.margin,
                      i.context.c_str());
        os << buf;
    }
}

} // namespace sdde
