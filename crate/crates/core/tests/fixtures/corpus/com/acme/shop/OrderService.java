package com.acme.shop;

/**
 * Places and cancels orders.
 *
 * @sketchlink 0f1c00000-0000-4000-8000-000000000010
 * @sketchlink 0f1c00000-0000-4000-8000-000000000011
 */
public interface OrderService {
    /** @sketchlink 0f1c00000-0000-4000-8000-000000000012 */
    Order place(Customer customer, List<Item> items);

    void cancel(Order order);
}
