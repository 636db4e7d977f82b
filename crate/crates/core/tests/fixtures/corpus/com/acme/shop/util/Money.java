package com.acme.shop.util;

public final class Money {
    /** @sketchlink 0f1c00000-0000-4000-8000-000000000016 */
    public static final int CENTS = 100;

    private Money() {
    }

    public static int round(double value) {
        long r = Math.round(value * CENTS); /* @sketchlink 0f1c00000-0000-4000-8000-000000000017 */
        return (int) r;
    }
}
