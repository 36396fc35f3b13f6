// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ccanet/evaluation.hpp"
#include "json.hpp"

namespace ccanet {

ReportTable make_table(std::span<const EvalReport> reports) {
  ReportTable table;
  std::map<std::string, std::vector<const EvalReport*>> by_mode;
  for (const EvalReport& r : reports) {
    if (by_mode.find(r.mode) == by_mode.end()) table.rows.push_back(r.mode);
    by_mode[r.mode].push_back(&r);
    for (const auto& [domain, metrics] : r.domains) {
      for (const std::string& name : r.metric_names) {
        if (metrics.count(name) == 0) continue;
        const std::pair<std::string, std::string> col{domain, name};
        if (std::find(table.columns.begin(), table.columns.end(), col) == table.columns.end()) {
          table.columns.push_back(col);
        }
      }
    }
  }
  for (const std::string& mode : table.rows) {
    std::vector<double> row;
    for (const auto& [domain, name] : table.columns) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const EvalReport* r : by_mode[mode]) {
        const auto d = r->domains.find(domain);
        if (d == r->domains.end()) continue;
        const auto v = d->second.find(name);
        if (v == d->second.end()) continue;
        sum += v->second;
        ++count;
      }
      row.push_back(count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count));
    }
    table.values.push_back(std::move(row));
  }
  return table;
}

std::string ReportTable::to_markdown() const {
  std::ostringstream os;
  os << "| mode |";
  for (const auto& [domain, name] : columns) os << ' ' << domain << ' ' << name << " |";
  os << "\n|---|";
  for (std::size_t c = 0; c < columns.size(); ++c) os << "---|";
  os << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << "| " << rows[r] << " |";
    for (const double v : values[r]) {
      if (std::isnan(v)) {
        os << " - |";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.4f |", v);
        os << buf;
      }
    }
    os << '\n';
  }
  return os.str();
}

std::string ReportTable::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& [domain, name] : columns) cols.push_back({{"domain", domain}, {"metric", name}});
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& row : values) {
    nlohmann::json r = nlohmann::json::array();
    for (const double v : row) r.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    vals.push_back(std::move(r));
  }
  return nlohmann::json{{"rows", rows}, {"columns", std::move(cols)}, {"values", std::move(vals)}}.dump(2);
}

}  // namespace ccanet
