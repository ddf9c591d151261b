// Copyright 2026 The pmwcache Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pmwcache/dataset_csv.h"

#include <algorithm>
#include <string>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"

namespace pmwcache {
namespace {

constexpr char kPartitionColumn[] = "t";

std::vector<std::string> SplitRow(const std::string& line) {
  std::vector<std::string> cells = absl::StrSplit(line, ',');
  for (std::string& cell : cells) {
    cell = std::string(absl::StripAsciiWhitespace(cell));
  }
  return cells;
}

absl::StatusOr<std::vector<int64_t>> ParseRow(const std::string& line,
                                              size_t columns, size_t line_no) {
  std::vector<std::string> cells = SplitRow(line);
  if (cells.size() != columns) {
    return absl::InvalidArgumentError(
        absl::StrCat("line ", line_no, ": expected ", columns,
                     " columns, got ", cells.size()));
  }
  std::vector<int64_t> values(columns);
  for (size_t c = 0; c < columns; ++c) {
    if (!absl::SimpleAtoi(cells[c], &values[c]) || values[c] < 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": '", cells[c],
                       "' is not a non-negative integer"));
    }
  }
  return values;
}

bool NextLine(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!absl::StripAsciiWhitespace(line).empty()) return true;
  }
  return false;
}

}  // namespace

absl::StatusOr<std::vector<Partition>> ReadDatasetCsv(
    std::istream& in, const DataDomain& domain) {
  std::string line;
  if (!NextLine(in, line)) return absl::InvalidArgumentError("empty CSV");
  const std::vector<std::string> header = SplitRow(line);

  // column -> attribute index, or -1 for the partition column.
  std::vector<int> column_role(header.size());
  std::vector<bool> seen(domain.num_attributes(), false);
  bool has_partition = false;
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == kPartitionColumn) {
      if (has_partition) {
        return absl::InvalidArgumentError("duplicate partition column 't'");
      }
      has_partition = true;
      column_role[c] = -1;
      continue;
    }
    const int j = domain.AttributeIndex(header[c]);
    if (j < 0 || seen[j]) {
      return absl::InvalidArgumentError(
          absl::StrCat("unexpected or duplicate column '", header[c], "'"));
    }
    seen[j] = true;
    column_role[c] = j;
  }
  for (size_t j = 0; j < seen.size(); ++j) {
    if (!seen[j]) {
      return absl::InvalidArgumentError(
          absl::StrCat("missing column for attribute '",
                       domain.attributes()[j].name, "'"));
    }
  }

  std::vector<std::vector<uint64_t>> counts;
  std::vector<int64_t> point(domain.num_attributes());
  size_t line_no = 1;
  while (NextLine(in, line)) {
    ++line_no;
    absl::StatusOr<std::vector<int64_t>> values =
        ParseRow(line, header.size(), line_no);
    if (!values.ok()) return values.status();
    int64_t t = 0;
    for (size_t c = 0; c < header.size(); ++c) {
      if (column_role[c] < 0) {
        t = (*values)[c];
      } else {
        point[column_role[c]] = (*values)[c];
      }
    }
    absl::StatusOr<uint64_t> bin = domain.BinIndex(point);
    if (!bin.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": ", bin.status().message()));
    }
    if (static_cast<size_t>(t) >= counts.size()) {
      counts.resize(t + 1, std::vector<uint64_t>(domain.size(), 0));
    }
    ++counts[t][*bin];
  }
  if (counts.empty()) counts.emplace_back(domain.size(), 0);

  std::vector<Partition> partitions;
  partitions.reserve(counts.size());
  for (size_t t = 0; t < counts.size(); ++t) {
    absl::StatusOr<Partition> part =
        Partition::Create(static_cast<PartitionId>(t), std::move(counts[t]));
    if (!part.ok()) return part.status();
    partitions.push_back(*std::move(part));
  }
  return partitions;
}

absl::StatusOr<DomainPtr> InferDomainFromCsv(std::istream& in) {
  std::string line;
  if (!NextLine(in, line)) return absl::InvalidArgumentError("empty CSV");
  const std::vector<std::string> header = SplitRow(line);
  std::vector<int64_t> max_value(header.size(), 0);
  size_t line_no = 1;
  while (NextLine(in, line)) {
    ++line_no;
    absl::StatusOr<std::vector<int64_t>> values =
        ParseRow(line, header.size(), line_no);
    if (!values.ok()) return values.status();
    for (size_t c = 0; c < header.size(); ++c) {
      max_value[c] = std::max(max_value[c], (*values)[c]);
    }
  }
  std::vector<Attribute> attributes;
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == kPartitionColumn) continue;
    attributes.push_back({header[c], max_value[c] + 1});
  }
  return DataDomain::Create(std::move(attributes));
}

absl::Status WriteDatasetCsv(std::ostream& out, const DataDomain& domain,
                             absl::Span<const Partition> partitions) {
  std::vector<std::string> names;
  for (const Attribute& attribute : domain.attributes()) {
    names.push_back(attribute.name);
  }
  names.push_back(kPartitionColumn);
  out << absl::StrJoin(names, ",") << "\n";
  for (const Partition& part : partitions) {
    if (part.counts.size() != domain.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("partition ", part.id, " does not match the domain"));
    }
    for (uint64_t bin = 0; bin < part.counts.size(); ++bin) {
      if (part.counts[bin] == 0) continue;
      const std::string row =
          absl::StrCat(absl::StrJoin(domain.PointAt(bin), ","), ",", part.id);
      for (uint64_t r = 0; r < part.counts[bin]; ++r) out << row << "\n";
    }
  }
  if (!out) return absl::DataLossError("write failed");
  return absl::OkStatus();
}

}  // namespace pmwcache
