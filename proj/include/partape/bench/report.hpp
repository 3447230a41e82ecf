// Copyright 2026 The partape Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "partape/bench/run.hpp"
#include "partape/errors.hpp"

namespace partape::bench {

using Row = nlohmann::ordered_json;

enum class ReportFormat { Csv, Json };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw ConfigError("unknown report format '" + s + "' (csv|json)");
}

// One flat row per report. CSV and JSON share the same columns.
inline Row to_row(const BenchReport& r) {
  Row row;
  row["cell"] = r.cell;
  for (const auto& [k, v] : describe(r.config)) row[k] = v;
  row["ok"] = r.ok;
  row["error"] = r.error;
  for (const char* p : kReportPhases) {
    const auto it = r.phases.find(p);
    const PhaseSummary s = it == r.phases.end() ? PhaseSummary{} : it->second;
    row[std::string(p) + "_mean"] = s.mean;
    row[std::string(p) + "_min"] = s.min;
    row[std::string(p) + "_max"] = s.max;
  }
  row["measured_reps"] = r.measured_reps;
  row["tape_bytes"] = r.tape.bytes;
  row["tape_statements"] = r.tape.statements;
  row["tape_arguments"] = r.tape.arg_entries;
  std::string per_thread;
  for (const auto& t : r.tape_per_thread) {
    if (!per_thread.empty()) per_thread += ";";
    per_thread += std::to_string(t.bytes);
  }
  row["tape_bytes_per_thread"] = per_thread;
  row["secondary_tape_bytes"] = r.secondary_tape.bytes;
  row["tape_deterministic"] = r.tape_deterministic;
  row["adjoint_capacity"] = r.adjoint_capacity;
  row["memory_hwm_kb"] = r.memory_hwm_kb;
  row["loop_plan"] = r.colored ? "coloring" : "reduction";
  row["group_size"] = r.group_size;
  row["coloring_efficiency"] = r.coloring_efficiency;
  row["primal_iterations"] = r.primal_iterations;
  row["primal_converged"] = r.primal_converged;
  row["adjoint_iterations"] = r.adjoint_iterations;
  row["adjoint_residual"] = r.adjoint_residual;
  row["adjoint_converged"] = r.adjoint_converged;
  row["objective"] = r.objective;
  row["source_sensitivity"] = r.source_sensitivity;
  row["gradient_checksum"] = r.gradient_checksum;
  return row;
}

inline std::string csv_field(const Row& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

inline void write_csv(std::ostream& os, const std::vector<BenchReport>& reports) {
  bool header = false;
  for (const auto& r : reports) {
    const Row row = to_row(r);
    if (!header) {
      bool first = true;
      for (const auto& [k, v] : row.items()) {
        os << (first ? "" : ",") << k;
        first = false;
      }
      os << "\n";
      header = true;
    }
    bool first = true;
    for (const auto& [k, v] : row.items()) {
      os << (first ? "" : ",") << csv_field(v);
      first = false;
    }
    os << "\n";
  }
}

inline void write_json(std::ostream& os, const std::vector<BenchReport>& reports) {
  Row all = Row::array();
  for (const auto& r : reports) all.push_back(to_row(r));
  os << all.dump(2) << "\n";
}

inline void write_report(std::ostream& os, const std::vector<BenchReport>& reports,
                         ReportFormat f) {
  if (f == ReportFormat::Csv) {
    write_csv(os, reports);
  } else {
    write_json(os, reports);
  }
}

// path "" or "-" writes to stdout.
inline void emit_report(const std::vector<BenchReport>& reports, ReportFormat f,
                        const std::string& path) {
  if (path.empty() || path == "-") {
    write_report(std::cout, reports, f);
    std::cout.flush();
    return;
  }
  std::ofstream os(path);
  if (!os) throw Error("cannot open report file '" + path + "'");
  write_report(os, reports, f);
  os.flush();
  if (!os) throw Error("failed writing report file '" + path + "'");
}

// Splits CSV text into records of fields (quoted fields supported).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      row.push_back(field);
      field.clear();
    } else if (ch == '\n') {
      row.push_back(field);
      rows.push_back(row);
      row.clear();
      field.clear();
      any = false;
    } else {
      field += ch;
      any = true;
    }
  }
  if (any || !row.empty()) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace partape::bench
