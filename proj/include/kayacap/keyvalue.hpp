#pragma once

// Flat `key = value` text with optional `[section]` headers and `#` comments.

#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "kayacap/error.hpp"
#include "kayacap/ingestion.hpp"

namespace kayacap {

struct KeyValueEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

class KeyValueSection {
public:
    KeyValueSection(std::string name, std::string source, std::size_t line)
        : name_(std::move(name)), source_(std::move(source)), line_(line) {}

    const std::string& name() const noexcept { return name_; }
    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }
    const std::vector<KeyValueEntry>& entries() const noexcept { return entries_; }

    void add(KeyValueEntry e) {
        for (const auto& existing : entries_)
            if (existing.key == e.key)
                throw ConfigError(fmt::format("{}:{}: duplicate key '{}' (first set on line {})", source_, e.line, e.key,
                                              existing.line));
        entries_.push_back(std::move(e));
    }

    const KeyValueEntry* find(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.key == key)
                return &e;
        return nullptr;
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    const KeyValueEntry& require(const std::string& key) const {
        if (const auto* e = find(key))
            return *e;
        throw ConfigError(fmt::format("{}:{}: missing key '{}'{}", source_, line_, key,
                                      name_.empty() ? "" : fmt::format(" in [{}]", name_)));
    }

    std::string get_string(const std::string& key) const { return require(key).value; }

    std::optional<std::string> get_optional(const std::string& key) const {
        if (const auto* e = find(key))
            return e->value;
        return std::nullopt;
    }

    double get_double(const std::string& key) const {
        const auto& e = require(key);
        auto v = detail::parse_double(e.value);
        if (!v)
            throw ConfigError(fmt::format("{}:{}: '{}' must be a number, got '{}'", source_, e.line, key, e.value));
        return *v;
    }

    int get_int(const std::string& key) const {
        const auto& e = require(key);
        auto v = detail::parse_int(e.value);
        if (!v)
            throw ConfigError(fmt::format("{}:{}: '{}' must be an integer, got '{}'", source_, e.line, key, e.value));
        return *v;
    }

    bool get_bool(const std::string& key) const {
        const auto& e = require(key);
        const std::string v = detail::lowercase(e.value);
        if (v == "true" || v == "yes" || v == "1")
            return true;
        if (v == "false" || v == "no" || v == "0")
            return false;
        throw ConfigError(fmt::format("{}:{}: '{}' must be true or false, got '{}'", source_, e.line, key, e.value));
    }

    // Reject keys outside `allowed`.
    void check_keys(const std::set<std::string>& allowed) const {
        for (const auto& e : entries_)
            if (!allowed.contains(e.key))
                throw ConfigError(fmt::format("{}:{}: unknown key '{}'", source_, e.line, e.key));
    }

private:
    std::string name_;
    std::string source_;
    std::size_t line_;
    std::vector<KeyValueEntry> entries_;
};

class KeyValueDocument {
public:
    static KeyValueDocument parse(std::istream& in, const std::string& source = "<stream>") {
        KeyValueDocument doc;
        doc.sections_.emplace_back("", source, 1);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string_view sv = line;
            if (auto hash = sv.find('#'); hash != std::string_view::npos)
                sv = sv.substr(0, hash);
            sv = detail::trim(sv);
            if (sv.empty())
                continue;
            if (sv.front() == '[') {
                if (sv.back() != ']')
                    throw ConfigError(fmt::format("{}:{}: unterminated section header", source, line_no));
                doc.sections_.emplace_back(std::string(detail::trim(sv.substr(1, sv.size() - 2))), source, line_no);
                continue;
            }
            auto eq = sv.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, line_no));
            std::string key(detail::trim(sv.substr(0, eq)));
            if (key.empty())
                throw ConfigError(fmt::format("{}:{}: empty key", source, line_no));
            doc.sections_.back().add({std::move(key), std::string(detail::trim(sv.substr(eq + 1))), line_no});
        }
        return doc;
    }

    static KeyValueDocument load(const std::filesystem::path& path) {
        auto in = detail::open_input(path);
        return parse(in, path.string());
    }

    const KeyValueSection& root() const { return sections_.front(); }

    // Named sections in file order.
    std::vector<const KeyValueSection*> sections() const {
        std::vector<const KeyValueSection*> out;
        for (std::size_t i = 1; i < sections_.size(); ++i)
            out.push_back(&sections_[i]);
        return out;
    }

private:
    std::vector<KeyValueSection> sections_;
};

} // namespace kayacap
