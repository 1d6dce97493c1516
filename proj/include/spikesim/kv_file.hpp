#pragma once

// Minimal sectioned key/value text format shared by model descriptors and
// hardware configs:
//
//   # comment
//   [section.sub]
//   key = value
//
// Sections and keys keep file order so that writing a parsed document
// reproduces it exactly when it was produced by `KvDocument::str()`.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spikesim/error.hpp"

namespace spikesim {

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
    {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true)
    {
        const auto next = s.find(sep, pos);
        out.emplace_back(trim(s.substr(pos, next - pos)));
        if (next == std::string_view::npos)
        {
            break;
        }
        pos = next + 1;
    }
    return out;
}

} // namespace detail

class KvSection
{
public:
    explicit KvSection(std::string name) : name_(std::move(name)) {}

    [[nodiscard]] const std::string &name() const noexcept { return name_; }
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>> &
    entries() const noexcept
    {
        return entries_;
    }

    [[nodiscard]] bool has(std::string_view key) const
    {
        return find(key) != nullptr;
    }

    void set(std::string key, std::string value)
    {
        for (auto &[k, v] : entries_)
        {
            if (k == key)
            {
                v = std::move(value);
                return;
            }
        }
        entries_.emplace_back(std::move(key), std::move(value));
    }

    void set(std::string key, std::int64_t value)
    {
        set(std::move(key), std::to_string(value));
    }

    [[nodiscard]] const std::string *find(std::string_view key) const
    {
        for (const auto &[k, v] : entries_)
        {
            if (k == key)
            {
                return &v;
            }
        }
        return nullptr;
    }

    [[nodiscard]] const std::string &get(std::string_view key) const
    {
        const auto *v = find(key);
        if (v == nullptr)
        {
            throw Error("missing key '" + std::string(key) + "' in [" +
                    name_ + "]");
        }
        return *v;
    }

    [[nodiscard]] std::int64_t get_int(std::string_view key) const
    {
        return parse_int(get(key), key);
    }

    [[nodiscard]] std::int64_t get_int(std::string_view key,
            std::int64_t fallback) const
    {
        const auto *v = find(key);
        return v == nullptr ? fallback : parse_int(*v, key);
    }

    [[nodiscard]] double get_double(std::string_view key) const
    {
        return parse_double(get(key), key);
    }

    [[nodiscard]] double get_double(std::string_view key, double fallback) const
    {
        const auto *v = find(key);
        return v == nullptr ? fallback : parse_double(*v, key);
    }

    [[nodiscard]] std::string get_string(std::string_view key,
            std::string fallback) const
    {
        const auto *v = find(key);
        return v == nullptr ? std::move(fallback) : *v;
    }

    [[nodiscard]] std::int64_t parse_int(const std::string &text,
            std::string_view key) const
    {
        std::int64_t value = 0;
        const auto *end = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(text.data(), end, value);
        if (ec != std::errc() || ptr != end)
        {
            throw Error("expected integer for '" + std::string(key) +
                    "' in [" + name_ + "], got '" + text + "'");
        }
        return value;
    }

    /// Accepts anything strtod does, plus "inf"/"infinity".
    [[nodiscard]] double parse_double(const std::string &text,
            std::string_view key) const
    {
        if (text == "inf" || text == "infinity")
        {
            return std::numeric_limits<double>::infinity();
        }
        std::istringstream in(text);
        in.imbue(std::locale::classic());
        double value = 0.0;
        in >> value;
        if (in.fail() || !in.eof())
        {
            throw Error("expected number for '" + std::string(key) +
                    "' in [" + name_ + "], got '" + text + "'");
        }
        return value;
    }

private:
    std::string name_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

class KvDocument
{
public:
    [[nodiscard]] const std::vector<KvSection> &sections() const noexcept
    {
        return sections_;
    }

    [[nodiscard]] const KvSection *find(std::string_view name) const
    {
        for (const auto &s : sections_)
        {
            if (s.name() == name)
            {
                return &s;
            }
        }
        return nullptr;
    }

    [[nodiscard]] const KvSection &get(std::string_view name) const
    {
        const auto *s = find(name);
        if (s == nullptr)
        {
            throw Error("missing section [" + std::string(name) + "]");
        }
        return *s;
    }

    KvSection &section(std::string name)
    {
        for (auto &s : sections_)
        {
            if (s.name() == name)
            {
                return s;
            }
        }
        return sections_.emplace_back(std::move(name));
    }

    /// Parses text; duplicate keys or sections are rejected.
    static KvDocument parse(std::string_view text)
    {
        KvDocument doc;
        KvSection *current = &doc.section("");
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size())
        {
            const auto eol = std::min(text.find('\n', pos), text.size());
            const auto line = detail::trim(text.substr(pos, eol - pos));
            pos = eol + 1;
            ++line_no;
            if (line.empty() || line.front() == '#')
            {
                if (eol == text.size())
                {
                    break;
                }
                continue;
            }
            if (line.front() == '[')
            {
                if (line.back() != ']')
                {
                    throw Error("malformed section header at line " +
                            std::to_string(line_no));
                }
                std::string name(detail::trim(line.substr(1, line.size() - 2)));
                if (name.empty() || doc.find(name) != nullptr)
                {
                    throw Error("empty or duplicate section [" + name +
                            "] at line " + std::to_string(line_no));
                }
                current = &doc.section(std::move(name));
            }
            else
            {
                const auto eq = line.find('=');
                if (eq == std::string_view::npos)
                {
                    throw Error("expected 'key = value' at line " +
                            std::to_string(line_no));
                }
                std::string key(detail::trim(line.substr(0, eq)));
                std::string value(detail::trim(line.substr(eq + 1)));
                if (key.empty() || current->has(key))
                {
                    throw Error("empty or duplicate key '" + key +
                            "' at line " + std::to_string(line_no));
                }
                current->set(std::move(key), std::move(value));
            }
            if (eol == text.size())
            {
                break;
            }
        }
        return doc;
    }

    static KvDocument read(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw Error("cannot open " + path.string());
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }

    [[nodiscard]] std::string str(std::string_view header_comment = {}) const
    {
        std::ostringstream out;
        if (!header_comment.empty())
        {
            out << "# " << header_comment << '\n';
        }
        bool first = true;
        for (const auto &s : sections_)
        {
            if (s.name().empty() && s.entries().empty())
            {
                continue;
            }
            if (!first)
            {
                out << '\n';
            }
            first = false;
            if (!s.name().empty())
            {
                out << '[' << s.name() << "]\n";
            }
            for (const auto &[k, v] : s.entries())
            {
                out << k << " = " << v << '\n';
            }
        }
        return out.str();
    }

private:
    std::vector<KvSection> sections_;
};

/// Shortest decimal text that parses back to exactly `value`.
inline std::string format_double(double value)
{
    if (std::isinf(value))
    {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace spikesim
