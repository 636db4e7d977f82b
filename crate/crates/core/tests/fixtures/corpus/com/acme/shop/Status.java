package com.acme.shop;

/** @sketchlink 0f1c00000-0000-4000-8000-000000000013 */
public enum Status {
    NEW,
    /** @sketchlink 0f1c00000-0000-4000-8000-000000000015 */
    PAID,
    SHIPPED;

    /** @sketchlink 0f1c00000-0000-4000-8000-000000000014 */
    public boolean isFinal() {
        return this == SHIPPED;
    }
}
