#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spark/cascade.hpp"
#include "spark/css.hpp"
#include "spark/document_store.hpp"
#include "spark/html.hpp"

namespace spark {

/// A snapshot's entry document plus the stylesheets it pulls in, in cascade order.
struct Page {
  std::string html_path;
  DomTree tree;
  std::vector<Stylesheet> sheets;
  std::vector<std::string> diagnostics;
};

/// index.html when present, otherwise the first .html/.htm path.
inline std::optional<std::string> primary_html(const FileMap& files) {
  if (files.contains("index.html")) return std::string("index.html");
  for (const auto& [path, _] : files) {
    if (path.ends_with(".html") || path.ends_with(".htm")) return path;
  }
  return std::nullopt;
}

/// Resolves an href against the directory of `from`; nullopt for external URLs.
inline std::optional<std::string> resolve_href(const std::string& from, std::string href) {
  if (href.find("://") != std::string::npos || href.starts_with("//") || href.starts_with("data:")) {
    return std::nullopt;
  }
  if (auto cut = href.find_first_of("?#"); cut != std::string::npos) href.resize(cut);
  std::vector<std::string> parts;
  if (!href.starts_with("/")) {
    const auto slash = from.rfind('/');
    if (slash != std::string::npos) href = from.substr(0, slash + 1) + href;
  }
  std::size_t start = 0;
  while (start <= href.size()) {
    const auto end = std::min(href.find('/', start), href.size());
    const auto seg = href.substr(start, end - start);
    if (seg == "..") {
      if (parts.empty()) return std::nullopt;
      parts.pop_back();
    } else if (!seg.empty() && seg != ".") {
      parts.push_back(seg);
    }
    start = end + 1;
  }
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "/") + p;
  return out;
}

/// Parses the entry document and its stylesheets. nullopt when the snapshot
/// holds no HTML file at all.
inline std::optional<Page> load_page(const FileMap& files) {
  auto html_path = primary_html(files);
  if (!html_path) return std::nullopt;
  Page page;
  page.html_path = *html_path;
  auto parsed = parse_html(files.at(*html_path));
  page.tree = std::move(parsed.tree);
  page.diagnostics = std::move(parsed.diagnostics);
  auto add_sheet = [&](std::string_view css) {
    auto sheet = parse_css(css);
    for (auto& d : sheet.diagnostics) page.diagnostics.push_back("css: " + d);
    page.sheets.push_back(std::move(sheet.sheet));
  };
  for (NodeId id : page.tree.elements()) {
    const auto& n = page.tree.node(id);
    if (n.tag == "style") {
      add_sheet(n.children.empty() ? std::string() : page.tree.node(n.children[0]).text);
    } else if (n.tag == "link") {
      auto rel = page.tree.attribute(id, "rel");
      auto href = page.tree.attribute(id, "href");
      if (!rel || !href || ascii_lower(*rel).find("stylesheet") == std::string::npos) continue;
      auto path = resolve_href(page.html_path, std::string(*href));
      if (!path) continue;
      auto it = files.find(*path);
      if (it == files.end()) {
        page.diagnostics.push_back("linked stylesheet '" + std::string(*href) + "' not found");
        continue;
      }
      add_sheet(it->second);
    }
  }
  return page;
}

}  // namespace spark
