package com.acme.shop.util;

public final class Strings {
    static final String HELP = "see @sketchlink 0f1c00000-0000-4000-8000-000000000099";

    public static boolean blank(String s) {
        return s == null || s.trim().isEmpty();
    }
}

// @sketchlink 0f1c00000-0000-4000-8000-000000000018
