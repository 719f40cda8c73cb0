#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sdde {

enum class CheckStatus { pass, fail, skip };

std::string_view to_string(CheckStatus s) noexcept;

struct CheckItem {
    std::string check_id;
    CheckStatus status = CheckStatus::skip;
    double measured = 0.0;
    double bound = 0.0;
    double margin = 0.0; // bound - measured (measured - bound for lower bounds)
    std::string context;
};

/// Allowed shortfall for a check: absolute plus relative to |bound|.
struct Slack {
    double absolute = 0.0;
    double relative = 0.0;

    double at(double bound) const noexcept;
};

/// Centralized slack table; unknown ids get zero slack.
Slack slack_for(std::string_view check_id) noexcept;

class CheckReport {
public:
    /// Upper-bound check `measured <= bound` with the table slack for `id`.
    CheckItem& add_bound(std::string id, double measured, double bound, std::string context = {});
    /// Lower-bound check `measured >= bound`; margin = measured - bound.
    CheckItem& add_lower_bound(std::string id, double measured, double bound, std::string context = {});
    CheckItem& add_flag(std::string id, bool ok, std::string context = {}, double measured = 0.0, double bound = 0.0);
    CheckItem& add_skip(std::string id, std::string context);
    void add(CheckItem item);
    void merge(const CheckReport& other);

    const std::vector<CheckItem>& items() const noexcept { return items_; }
    bool all_pass() const noexcept;
    const CheckItem* find(std::string_view id) const noexcept;

    std::string to_json() const;
    void print_table(std::ostream& os) const;

private:
    std::vector<CheckItem> items_;
};

} // namespace sdde
